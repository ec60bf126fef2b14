/// Styles the stylist may choose from.
pub const STYLES: [&str; 31] = [
    "Contemporary",
    "Coastal",
    "Scandinavian",
    "Shabby Chic",
    "Transitional",
    "Modern",
    "Mid-century",
    "Retro",
    "Minimalist",
    "Traditional",
    "Farmhouse",
    "Antique",
    "Industrial",
    "Rustic",
    "Vintage",
    "Mission",
    "French",
    "Art Deco",
    "Victorian",
    "Chippendale",
    "Country",
    "Craftsman",
    "Shaker",
    "Queen Anne",
    "Hepplewhite",
    "Louis XVI",
    "Asian",
    "Jacobean",
    "Colonial",
    "Federal",
    "Sheraton",
];

/// Materials the stylist may choose from (unique entries).
pub const MATERIALS: [&str; 16] = [
    "wood", "plywood", "marble", "paper", "fibre", "plastic", "glass", "textile", "iron", "steel", "gold", "silver",
    "bronze", "cotton", "linen", "leather",
];

/// A closed vocabulary with case-insensitive lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct Bank {
    entries: Vec<String>,
}

impl Bank {
    /// Builds a bank, dropping case-insensitive duplicates (first spelling wins).
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out: Vec<String> = Vec::new();
        for e in entries {
            let e = e.into();
            if !out.iter().any(|x| x.eq_ignore_ascii_case(&e)) {
                out.push(e);
            }
        }
        Self { entries: out }
    }

    pub fn styles() -> Self {
        Self::new(STYLES)
    }

    pub fn materials() -> Self {
        Self::new(MATERIALS)
    }

    /// Canonical spelling of `value`, if it is in the bank.
    pub fn lookup(&self, value: &str) -> Option<&str> {
        let v = value.trim();
        self.entries.iter().find(|e| e.eq_ignore_ascii_case(v)).map(String::as_str)
    }

    pub fn contains(&self, value: &str) -> bool {
        self.lookup(value).is_some()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bank_sizes() {
        assert_eq!(Bank::styles().len(), 31);
        assert_eq!(Bank::materials().len(), 16);
    }

    #[test]
    fn duplicates_collapse() {
        let b = Bank::new(["wood", "paper", "Paper", "glass", "paper"]);
        assert_eq!(b.entries(), &["wood", "paper", "glass"]);
    }

    #[test]
    fn lookup_is_case_insensitive() {
        let s = Bank::styles();
        assert_eq!(s.lookup("scandinavian"), Some("Scandinavian"));
        assert_eq!(s.lookup(" art deco "), Some("Art Deco"));
        assert_eq!(s.lookup("cyberpunk"), None);
        assert_eq!(Bank::materials().lookup("WOOD"), Some("wood"));
    }
}
