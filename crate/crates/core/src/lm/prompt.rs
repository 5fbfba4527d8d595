/// `"Context: <knowledge>. Question: <question>. Answer: "`, or the
/// context-free form for the naive baseline. Pure concatenation.
pub fn build_qa_prompt(question: &str, knowledge: Option<&str>) -> String {
    match knowledge {
        Some(k) => format!("Context: {k}. Question: {question}. Answer: "),
        None => format!("Question: {question}. Answer: "),
    }
}
