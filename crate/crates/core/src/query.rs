// SPDX-License-Identifier: Apache-2.0

/// Free text followed by keywords, all joined with `", "`.
///
/// Used by the feedback scenario, the HTTP service and any client that
/// refines a query with keywords, so all of them send the same string for
/// the same `(text, keywords)`. Blank parts are dropped.
pub fn compose_query<S: AsRef<str>>(text: &str, keywords: &[S]) -> String {
    let text = text.trim();
    let mut parts: Vec<&str> = Vec::with_capacity(keywords.len() + 1);
    if !text.is_empty() {
        parts.push(text);
    }
    parts.extend(keywords.iter().map(|k| k.as_ref().trim()).filter(|k| !k.is_empty()));
    parts.join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition() {
        assert_eq!(
            compose_query("A bunch of bananas sitting on top of a wooden table.", &["cup", "banana", "keyboard"]),
            "A bunch of bananas sitting on top of a wooden table., cup, banana, keyboard"
        );
        assert_eq!(compose_query("", &["car", "bus", "traffic light"]), "car, bus, traffic light");
        assert_eq!(compose_query("bananas on a table", &[] as &[&str]), "bananas on a table");
        assert_eq!(compose_query("  ", &[" ", ""]), "");
    }
}
