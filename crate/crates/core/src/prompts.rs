//! Prompt templates for role generation, per-role reasoning and evaluation.

use crate::eval::AnswerFormat;

pub const FORMAT_INSTRUCTION: &str = "Respond in the following format: <think>...</think>...";

/// Instruction field of generated SFT examples.
pub const SFT_INSTRUCTION: &str =
    "Please think from diverse perspectives to answer the question. Respond in the following format:<think>...</think>...";

/// Substring that identifies a role-generation prompt.
pub const ROLE_LIST_MARKER: &str = "The role perspective should be in the format of a list ONLY";

/// Substring that identifies a per-role answer request.
pub const ROLE_LINES_MARKER: &str = "give each role's answer on its own line";

/// Prefix of the line listing roles in a per-role answer request.
pub const ROLES_LINE_PREFIX: &str = "Roles: ";

const ROLE_FEW_SHOT: &str = "Please generate 2-5 role perspective to answer the following question. \
Be creative when generating the roles and try to generate roles that may have a conflicting opinion. \
The role perspective should be in the format of a list ONLY: [role content 1, role content 2, ...]\
Do not include any other information. \
Here are some examples that you should follow:

1.
Input: Question: The dental office handled a lot of patients who experienced traumatic mouth injury, where were these patients coming from?

Output: [Emergency room doctor, Police officer, Accident analyst]

2.
Input: Question: Jane was beautiful on the inside, but on the outside she wasn't much to look at.  How might she be described?

Output: [Critic, Psychological counselor, Fashion blogger]

3.
Input: Question: What does someone feel after running twenty six miles?

Output: [Professional marathon runner, Average people, Exercise physiologist, Disabled people]

4.
Input: Question: What would you do if you have curiosity about a new show?

Output: [Show director, Enthusiastic show fan, Busy people]

5.
Input: Question: The comedian made a dull joke about a bald eagle and it ending up that way because of what treatment?

Output: [wildlife protectors, Comedy theory researcher, Average audience]

6.
Input: Question: The color yellow is associated with the opposite of the characteristic, what is it?

Output: [Color psychologist, Early childhood educator, Personality researcher]

7.
Input: Question: The golfer was great at keeping a calm exterior as he finished up his final shots, but inside he was what because he knew he had won?

Output: [Golf commentator, Sports psychologist, Main competitor]

Your answer:
Input: ";

/// Few-shot prompt asking for a bracketed list of possibly conflicting roles.
pub fn role_generation(question: &str) -> String {
    format!("{ROLE_FEW_SHOT}Question: {question}\n\nOutput:")
}

/// Question, rendered options and the answer-format sentence.
pub fn question_block(question: &str, options: Option<&[String]>, format: &AnswerFormat) -> String {
    let mut block = format!("Question: {question}\n");
    if let Some(opts) = options.filter(|o| !o.is_empty()) {
        let rendered: Vec<String> = opts.iter().map(|o| format!("({o})")).collect();
        block.push_str(&format!("Options: {}\n", rendered.join(" ")));
    }
    block.push_str(&format.instruction());
    block
}

/// Reasoning prompt from a single role's point of view.
pub fn role_reasoning(question: &str, options: Option<&[String]>, format: &AnswerFormat, role: &str) -> String {
    format!(
        "Let's think from the perspective of {role} to answer the question. {FORMAT_INSTRUCTION}\n{}",
        question_block(question, options, format)
    )
}

/// Evaluation prompt. With `roles`, the model is asked for one answer line per role.
pub fn evaluation(question: &str, options: Option<&[String]>, format: &AnswerFormat, roles: Option<&[String]>) -> String {
    let mut prompt = format!(
        "Let's think from a diverse perspective to answer the question. {FORMAT_INSTRUCTION}\n{}",
        question_block(question, options, format)
    );
    if let Some(roles) = roles.filter(|r| !r.is_empty()) {
        prompt.push_str(&format!(
            "\n{ROLES_LINE_PREFIX}{}\nAfter thinking, {ROLE_LINES_MARKER} as `role: X`.",
            roles.join("; ")
        ));
    }
    prompt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::AnswerFormatKind;

    #[test]
    fn role_prompt_carries_conflict_instruction() {
        let p = role_generation("Who was free of drugs?");
        assert!(p.contains("may have a conflicting opinion"));
        assert!(p.contains(ROLE_LIST_MARKER));
        assert!(p.ends_with("Question: Who was free of drugs?\n\nOutput:"));
    }

    #[test]
    fn evaluation_lists_roles() {
        let f = AnswerFormat::with_default_alphabet(AnswerFormatKind::BoldParen);
        let roles = vec!["Brazil".to_string(), "Britain".to_string()];
        let opts = vec!["A".to_string(), "B".to_string()];
        let p = evaluation("Has he?", Some(&opts), &f, Some(&roles));
        assert!(p.contains("Options: (A) (B)\n"));
        assert!(p.contains("Roles: Brazil; Britain\n"));
        assert!(p.contains(ROLE_LINES_MARKER));
    }
}
