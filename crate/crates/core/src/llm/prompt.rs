use crate::ui::{render_html, UiState};
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupingRequest {
    pub app_name: String,
    pub state_html: String,
    pub candidate_element_ids: Vec<u32>,
}

impl GroupingRequest {
    pub fn new(app_name: &str, state: &UiState, candidates: &[u32]) -> Self {
        GroupingRequest {
            app_name: app_name.to_string(),
            state_html: render_html(state),
            candidate_element_ids: candidates.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputRequest {
    pub app_name: String,
    pub state_html: String,
    pub target_element_id: u32,
    pub field_hint: String,
}

impl InputRequest {
    /// Panics if `element_id` is not in `state`.
    pub fn new(app_name: &str, state: &UiState, element_id: u32) -> Self {
        let e = state.element(element_id).expect("input target exists in state");
        let hint = [e.content_desc.as_str(), e.text.as_str(), e.resource_id.as_str()]
            .into_iter()
            .find(|s| !s.is_empty())
            .unwrap_or("")
            .to_string();
        InputRequest {
            app_name: app_name.to_string(),
            state_html: render_html(state),
            target_element_id: element_id,
            field_hint: hint,
        }
    }
}

fn id_list(ids: &[u32]) -> String {
    ids.iter().map(|i| format!("e{i}")).collect::<Vec<_>>().join(", ")
}

/// Knowledge-organization prompt: instructions, the screen as HTML, a
/// step-by-step reasoning cue, and the JSON output format.
pub fn build_grouping_prompt(r: &GroupingRequest) -> String {
    let mut p = String::new();
    let _ = writeln!(
        p,
        "You are an expert in mobile app testing, helping to explore the app \"{}\".",
        r.app_name
    );
    p.push_str(
        "Below is the current screen of the app. Some of its interactive elements serve the same \
         function, for example the items of one list, the keys of one keypad, or the tabs of one bar. \
         Your task is to merge elements with the same function into groups so that each function is \
         explored only once.\n\n",
    );
    p.push_str("Screen (HTML):\n```html\n");
    p.push_str(&r.state_html);
    p.push_str("```\n");
    let _ = writeln!(p, "Candidate elements: {}\n", id_list(&r.candidate_element_ids));
    p.push_str(
        "Think step by step. First state briefly what each candidate element does. Then compare the \
         elements and find those whose functions are the same and whose effects would only differ in \
         their parameters. Only then decide the groups.\n\n",
    );
    p.push_str(
        "Output format: end your answer with a single JSON dict and nothing after it:\n\
         {\"groups\": [{\"members\": [\"e1\", \"e2\"], \"function\": \"<what these elements do>\"}]}\n\
         Use only the candidate ids. Each id may appear in at most one group. Elements with a unique \
         function may be listed as single-member groups or left out.\n",
    );
    p
}

/// Input-generation prompt: guidance, the page as HTML, the field to fill,
/// and the JSON response format.
pub fn build_input_prompt(r: &InputRequest) -> String {
    let mut p = String::new();
    let _ = writeln!(
        p,
        "You are testing the mobile app \"{}\" and need to type into a text field the way a real user would.",
        r.app_name
    );
    p.push_str("Give realistic, valid content that is likely to pass the app's input checks.\n\n");
    p.push_str("Current page (HTML):\n```html\n");
    p.push_str(&r.state_html);
    p.push_str("```\n");
    let _ = writeln!(
        p,
        "Input request: what should be typed into the field e{} (\"{}\")?\n",
        r.target_element_id, r.field_hint
    );
    p.push_str("Response format: reply with a single JSON dict: {\"input_text\": \"<text to type>\"}\n");
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ui::testing::{element, state};
    use crate::ui::Affordances;

    fn keypad() -> UiState {
        let elements = (0..10)
            .map(|i| element(i, "Button", &format!("digit_{i}"), &i.to_string(), Affordances::TOUCH))
            .collect();
        state("u1", "Main", elements)
    }

    #[test]
    fn grouping_prompt_blocks_in_order() {
        let s = keypad();
        let ids: Vec<u32> = (0..10).collect();
        let p = build_grouping_prompt(&GroupingRequest::new("Calculator", &s, &ids));
        let first_block = p.split("\n\n").next().unwrap();
        assert!(first_block.contains("Calculator"));
        let html = p.find("```html").unwrap();
        let cot = p.find("Think step by step").unwrap();
        let fmt = p.find("Output format").unwrap();
        assert!(html < cot && cot < fmt);
        assert!(p.contains("JSON dict"));
    }

    #[test]
    fn grouping_prompt_lists_every_button() {
        let s = keypad();
        let ids: Vec<u32> = (0..10).collect();
        let p = build_grouping_prompt(&GroupingRequest::new("Calculator", &s, &ids));
        assert_eq!(p.matches("<button id=").count(), 10);
    }

    #[test]
    fn prompts_are_deterministic() {
        let s = keypad();
        let a = build_grouping_prompt(&GroupingRequest::new("Calc", &s, &[1, 2]));
        let b = build_grouping_prompt(&GroupingRequest::new("Calc", &s, &[1, 2]));
        assert_eq!(a, b);
        let i1 = build_input_prompt(&InputRequest::new("Calc", &s, 3));
        let i2 = build_input_prompt(&InputRequest::new("Calc", &s, 3));
        assert_eq!(i1, i2);
    }

    #[test]
    fn input_prompt_names_field() {
        let mut e = element(4, "EditText", "email_field", "", Affordances {
            editable: true,
            ..Default::default()
        });
        e.content_desc = "Email".into();
        let s = state("u1", "Form", vec![e]);
        let r = InputRequest::new("Contacts", &s, 4);
        assert_eq!(r.field_hint, "Email");
        let p = build_input_prompt(&r);
        assert!(p.contains("\"Contacts\""));
        assert!(p.contains("e4 (\"Email\")"));
        let page = p.find("Current page").unwrap();
        let req = p.find("Input request").unwrap();
        let fmt = p.find("Response format").unwrap();
        assert!(page < req && req < fmt);
    }
}
