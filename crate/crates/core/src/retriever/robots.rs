//! Minimal robots.txt matcher: user-agent groups with Allow/Disallow
//! prefix rules, longest match wins, Allow wins ties. `*` and `$` are
//! honoured in patterns.

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RobotsRules {
    groups: Vec<Group>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Group {
    agents: Vec<String>,
    rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Rule {
    allow: bool,
    pattern: String,
}

impl RobotsRules {
    /// Rules that allow everything (missing or unreadable robots.txt).
    pub fn allow_all() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Self {
        let mut groups: Vec<Group> = Vec::new();
        let mut current: Option<Group> = None;
        let mut last_was_agent = false;

        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            let Some((field, value)) = line.split_once(':') else { continue };
            let field = field.trim().to_ascii_lowercase();
            let value = value.trim();
            match field.as_str() {
                "user-agent" => {
                    if !last_was_agent {
                        if let Some(g) = current.take() {
                            groups.push(g);
                        }
                        current = Some(Group::default());
                    }
                    if let Some(g) = current.as_mut() {
                        g.agents.push(value.to_ascii_lowercase());
                    }
                    last_was_agent = true;
                }
                "allow" | "disallow" => {
                    last_was_agent = false;
                    let Some(g) = current.as_mut() else { continue };
                    // An empty Disallow means "allow all" and adds no rule.
                    if value.is_empty() {
                        continue;
                    }
                    g.rules.push(Rule {
                        allow: field == "allow",
                        pattern: value.to_string(),
                    });
                }
                _ => last_was_agent = false,
            }
        }
        if let Some(g) = current {
            groups.push(g);
        }
        Self { groups }
    }

    fn group_for(&self, user_agent: &str) -> Option<&Group> {
        let ua = user_agent.to_ascii_lowercase();
        let product = ua.split(['/', ' ']).next().unwrap_or("");
        self.groups
            .iter()
            .filter_map(|g| {
                g.agents
                    .iter()
                    .filter(|a| a.as_str() != "*" && !a.is_empty() && product.starts_with(a.as_str()))
                    .map(String::len)
                    .max()
                    .map(|len| (len, g))
            })
            .max_by_key(|(len, _)| *len)
            .map(|(_, g)| g)
            .or_else(|| self.groups.iter().find(|g| g.agents.iter().any(|a| a == "*")))
    }

    /// Whether `path` (path plus optional query) may be fetched by `user_agent`.
    pub fn is_allowed(&self, user_agent: &str, path: &str) -> bool {
        let Some(group) = self.group_for(user_agent) else {
            return true;
        };
        let best = group
            .rules
            .iter()
            .filter(|r| pattern_matches(&r.pattern, path))
            .max_by(|a, b| a.pattern.len().cmp(&b.pattern.len()).then(a.allow.cmp(&b.allow)));
        best.is_none_or(|r| r.allow)
    }
}

fn pattern_matches(pattern: &str, path: &str) -> bool {
    let (pattern, anchored) = match pattern.strip_suffix('$') {
        Some(p) => (p, true),
        None => (pattern, false),
    };
    let pieces: Vec<&str> = pattern.split('*').collect();
    let mut pos = 0;
    for (i, piece) in pieces.iter().enumerate() {
        if i == 0 {
            if !path.starts_with(piece) {
                return false;
            }
            pos = piece.len();
            continue;
        }
        let last = i == pieces.len() - 1;
        if last && anchored {
            return path.len() >= pos + piece.len() && path.ends_with(piece);
        }
        match path[pos..].find(piece) {
            Some(at) => pos += at + piece.len(),
            None => return false,
        }
    }
    !anchored || pos == path.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
User-agent: *
Disallow: /private
Allow: /private/open
Disallow: /*.pdf$

User-agent: iral
User-agent: otherbot
Disallow: /
";

    #[test]
    fn star_group_rules() {
        let r = RobotsRules::parse(SAMPLE);
        assert!(r.is_allowed("somebot/1.0", "/public"));
        assert!(!r.is_allowed("somebot/1.0", "/private/x"));
        assert!(r.is_allowed("somebot/1.0", "/private/open/y"));
        assert!(!r.is_allowed("somebot/1.0", "/docs/a.pdf"));
        assert!(r.is_allowed("somebot/1.0", "/docs/a.pdf?x=1"));
    }

    #[test]
    fn specific_group_wins() {
        let r = RobotsRules::parse(SAMPLE);
        assert!(!r.is_allowed("iral/0.1 (+https://example.org)", "/public"));
        assert!(!r.is_allowed("OtherBot", "/"));
    }

    #[test]
    fn empty_disallow_allows() {
        let r = RobotsRules::parse("User-agent: *\nDisallow:\n");
        assert!(r.is_allowed("x", "/anything"));
        assert!(RobotsRules::allow_all().is_allowed("x", "/"));
    }
}
