//! Soft prompts and the two prompt templates (story continuation and
//! active-character question).

use serde::{Deserialize, Serialize};

use crate::action::{WeightedAction, ESCAPE_TRIGGERS};
use crate::error::{Error, Result};
use crate::motion::Character;

/// Rows in every vectors block: the longest tokenized base term, padded.
pub const SOFT_PROMPT_ROWS: usize = 5;

/// Placeholder written in place of a vectors block when a prompt is rendered
/// as plain text.
pub const VECTORS_PLACEHOLDER: &str = "<action>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterProfile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Reference to a user-supplied portrait image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub portrait: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorySettings {
    pub characters: [CharacterProfile; 2],
    #[serde(default)]
    pub scene: String,
}

impl StorySettings {
    pub fn new(names: [&str; 2], descriptions: [&str; 2], scene: &str) -> Self {
        let profile = |i: usize| CharacterProfile { name: names[i].into(), description: descriptions[i].into(), portrait: None };
        StorySettings { characters: [profile(0), profile(1)], scene: scene.into() }
    }

    pub fn name(&self, c: Character) -> &str {
        &self.characters[c.index()].name
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = &self.characters;
        if a.name.trim().is_empty() || b.name.trim().is_empty() {
            return Err(Error::InvalidArgument("character names must be non-empty".into()));
        }
        if a.name.trim() == b.name.trim() {
            return Err(Error::InvalidArgument("character names must be distinct".into()));
        }
        Ok(())
    }
}

impl Default for StorySettings {
    fn default() -> Self {
        StorySettings::new(
            ["Mia", "Tom"],
            ["a curious young fox", "a grumpy old badger"],
            "A quiet clearing in the woods at dusk.",
        )
    }
}

/// A 5 × d block of token-embedding rows plus the weighted terms it blends.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftBlock {
    pub rows: Vec<Vec<f64>>,
    pub terms: Vec<WeightedAction>,
}

impl SoftBlock {
    pub fn top_term(&self) -> Option<&str> {
        self.terms.first().map(|t| t.term.as_str())
    }

    pub fn has_escape_trigger(&self) -> bool {
        self.terms.iter().any(|t| ESCAPE_TRIGGERS.contains(&t.term.as_str()))
    }
}

/// One prompt segment, serialized exactly as the generator protocol expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PromptSegment {
    Text {
        value: String,
    },
    Vectors {
        rows: Vec<Vec<f64>>,
        /// Blended terms, highest weight first. Not sent over the wire.
        #[serde(skip)]
        terms: Vec<WeightedAction>,
    },
}

/// What a prompt asks for, kept alongside it for offline generators.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum PromptPurpose {
    #[default]
    Other,
    Story { agent: String, target: String },
    ActiveCharacter { names: [String; 2], sentence: String },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SoftPrompt {
    pub segments: Vec<PromptSegment>,
    pub purpose: PromptPurpose,
}

impl SoftPrompt {
    pub fn text(&mut self, s: impl AsRef<str>) {
        match self.segments.last_mut() {
            Some(PromptSegment::Text { value }) => value.push_str(s.as_ref()),
            _ => self.segments.push(PromptSegment::Text { value: s.as_ref().to_string() }),
        }
    }

    pub fn vectors(&mut self, block: &SoftBlock) {
        self.segments.push(PromptSegment::Vectors { rows: block.rows.clone(), terms: block.terms.clone() });
    }

    /// Plain-text view with each vectors block written as `<action>`.
    pub fn render(&self) -> String {
        self.render_with(|_| VECTORS_PLACEHOLDER.to_string())
    }

    /// Plain-text view with each vectors block replaced by `f(terms)`.
    pub fn render_with(&self, mut f: impl FnMut(&[WeightedAction]) -> String) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                PromptSegment::Text { value } => out.push_str(value),
                PromptSegment::Vectors { terms, .. } => out.push_str(&f(terms)),
            }
        }
        out
    }

    pub fn vector_blocks(&self) -> impl Iterator<Item = &Vec<Vec<f64>>> {
        self.segments.iter().filter_map(|s| match s {
            PromptSegment::Vectors { rows, .. } => Some(rows),
            PromptSegment::Text { .. } => None,
        })
    }
}

/// Inputs of the story-continuation prompt besides the settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct StoryContext<'a> {
    pub history: &'a [String],
    pub following: &'a [String],
    pub user_prompt: Option<&'a str>,
}

fn joined(sentences: &[String]) -> Option<String> {
    let parts: Vec<&str> = sentences.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    (!parts.is_empty()).then(|| parts.join(" "))
}

/// The story-continuation prompt, with `active` in the agent slot.
pub fn build_story_prompt(settings: &StorySettings, ctx: StoryContext<'_>, block: &SoftBlock, active: Character) -> SoftPrompt {
    let [c0, c1] = &settings.characters;
    let a = settings.name(active);
    let b = settings.name(active.other());
    let mut p = SoftPrompt::default();
    p.text(format!(
        "My story has the following characters:\n- {}: {}\n- {}: {}\n\nThe overall description of the scene is given below:\n{}\n\n",
        c0.name, c0.description, c1.name, c1.description, settings.scene
    ));
    if let Some(history) = joined(ctx.history) {
        p.text(format!("The previous story look like below: {history}\n\n"));
    }
    if let Some(following) = joined(ctx.following) {
        p.text(format!(
            "Note that after the sentence you are going to write, below sentences will follow. \
             That is, your sentence will come before the following sentences: {following}\n\n"
        ));
    }
    p.text(format!(
        "-----\nTask:\nWithout preamble, write a story sentence that continues the previous story into an interesting way. \
         The sentence should be fewer than 30 words. In the story sentence to write, {a} should actively do the below action, \
         while {b} usually being the subject of {a}'s action (e.g., for 'throw', {a} throws {b}, for 'approach', {a} approaches {b}).\n"
    ));
    if block.has_escape_trigger() {
        p.text(format!(
            "Only if the action is close to [escape, leave, avoid, ignore], {b} should cause {a} to take the action, \
             like chasing or bothering {a}.\n"
        ));
    }
    p.text("Action: ");
    p.vectors(block);
    p.text("\n");
    if let Some(prompt) = ctx.user_prompt.map(str::trim).filter(|s| !s.is_empty()) {
        p.text(format!(
            "\nTry to consider following instruction also when writing the sentence \
             (but prioritize the action that characters should take): {prompt}\n"
        ));
    }
    p.purpose = PromptPurpose::Story { agent: a.to_string(), target: b.to_string() };
    p
}

/// The question asking which character performs the action in `sentence`.
pub fn build_character_prompt(settings: &StorySettings, sentence: &str, block: &SoftBlock) -> SoftPrompt {
    let n0 = &settings.characters[0].name;
    let n1 = &settings.characters[1].name;
    let mut p = SoftPrompt::default();
    p.text(format!(
        "My story has the following characters:\n- character_0: {n0}\n- character_1: {n1}\nConsider this sentence: {}\n\n\
         Regarding this sentence, which character is taking the following action?\nAction: ",
        sentence.trim()
    ));
    p.vectors(block);
    p.text("\n\nAnswer with a number 0 or 1, without any preamble.");
    p.purpose = PromptPurpose::ActiveCharacter { names: [n0.clone(), n1.clone()], sentence: sentence.trim().to_string() };
    p
}

/// Strict parse of a `0`/`1` reply.
pub fn parse_character_reply(raw: &str) -> Result<Character> {
    match raw.trim() {
        "0" => Ok(Character::Sym0),
        "1" => Ok(Character::Sym1),
        _ => Err(Error::CharacterParse { raw: raw.to_string() }),
    }
}
