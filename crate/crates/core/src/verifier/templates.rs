use super::VerifierError;

pub const TEMPLATE_IDS: [u8; 5] = [1, 2, 3, 4, 5];

pub const TEMPLATE_VERSION: &str = "v1";

const BODIES: [&str; 5] = [
    include_str!("../../resources/templates/v1/template_1.txt"),
    include_str!("../../resources/templates/v1/template_2.txt"),
    include_str!("../../resources/templates/v1/template_3.txt"),
    include_str!("../../resources/templates/v1/template_4.txt"),
    include_str!("../../resources/templates/v1/template_5.txt"),
];

const PLACEHOLDERS: [&str; 3] = ["{question}", "{passage}", "{answer}"];

pub fn template_body(template_id: u8) -> Result<&'static str, VerifierError> {
    template_id
        .checked_sub(1)
        .and_then(|i| BODIES.get(usize::from(i)))
        .copied()
        .ok_or(VerifierError::UnknownTemplate(template_id))
}

/// Substitutes `{question}`, `{passage}` and `{answer}` in one left-to-right
/// pass, so placeholder-like text inside the values is left alone.
pub fn render_instruction(template_id: u8, question: &str, knowledge: &str, answer: &str) -> Result<String, VerifierError> {
    let body = template_body(template_id)?;
    let mut out = String::with_capacity(body.len() + question.len() + knowledge.len() + answer.len());
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        let (before, tail) = rest.split_at(open);
        out.push_str(before);
        let value = PLACEHOLDERS.iter().zip([question, knowledge, answer]).find(|(p, _)| tail.starts_with(**p));
        match value {
            Some((p, v)) => {
                out.push_str(v);
                rest = &tail[p.len()..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}
