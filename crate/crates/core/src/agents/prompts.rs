use std::path::Path;

const AGENT1: &str = include_str!("../../assets/prompts/agent1.txt");
const AGENT2: &str = include_str!("../../assets/prompts/agent2.txt");
const AGENT3: &str = include_str!("../../assets/prompts/agent3.txt");

/// Placeholder in the caption template replaced by the raw caption.
pub const CAPTION_PLACEHOLDER: &str = "[caption]";

/// Prompt templates for the three agents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prompts {
    /// Post-format applied to every raw caption.
    pub caption_template: String,
    pub summarizer: String,
    pub discriminator: String,
}

impl Default for Prompts {
    fn default() -> Self {
        Prompts {
            caption_template: AGENT1.to_string(),
            summarizer: AGENT2.to_string(),
            discriminator: AGENT3.to_string(),
        }
    }
}

impl Prompts {
    /// Loads `agent1.txt`, `agent2.txt` and `agent3.txt` from `dir`.
    /// Missing files fall back to the shipped templates.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let read = |name: &str, fallback: &str| -> std::io::Result<String> {
            match std::fs::read_to_string(dir.join(name)) {
                Ok(text) => Ok(text.trim_end_matches(['\n', '\r']).to_string()),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(fallback.to_string()),
                Err(e) => Err(e),
            }
        };
        Ok(Prompts {
            caption_template: read("agent1.txt", AGENT1)?,
            summarizer: read("agent2.txt", AGENT2)?,
            discriminator: read("agent3.txt", AGENT3)?,
        })
    }

    pub fn format_caption(&self, raw: &str) -> String {
        let raw = raw.trim();
        let raw = raw.strip_suffix('.').unwrap_or(raw);
        self.caption_template.replace(CAPTION_PLACEHOLDER, raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_templates() {
        let p = Prompts::default();
        assert_eq!(p.caption_template, "A picture of [caption].");
        assert!(p.summarizer.starts_with("The provided descriptions outline"));
        assert!(p.summarizer.ends_with("write in a single coherent sentence."));
        assert_eq!(
            p.discriminator,
            "Focus on the historical texts and image frames. Identify any abnormalities in the following content and provide a reason if any are found."
        );
    }

    #[test]
    fn caption_post_format() {
        let p = Prompts::default();
        assert_eq!(p.format_caption("a man near a shelf"), "A picture of a man near a shelf.");
        assert_eq!(p.format_caption("a dog."), "A picture of a dog.");
    }

    #[test]
    fn load_dir_overrides_and_falls_back() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("agent3.txt"), "Judge it.\n").unwrap();
        let p = Prompts::load_dir(dir.path()).unwrap();
        assert_eq!(p.discriminator, "Judge it.");
        assert_eq!(p.summarizer, Prompts::default().summarizer);
    }
}
