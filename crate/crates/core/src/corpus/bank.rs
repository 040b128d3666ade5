//! Sentence material for synthetic transcripts.
//!
//! Each (subtopic, level) pair owns one distinctive phrase. The generator
//! embeds phrases in transcripts; the mock backend recognises them in
//! retrieved excerpts, which is how it "reads" planted levels without access
//! to the ground-truth sidecar.

use crate::rubric::{subtopic_label, TAXONOMY};

/// Level phrases, indexed `[subtopic][level - 1]` in taxonomy order.
const PHRASES: [[&str; 5]; 15] = [
    // Socioeconomic Status - Income Level
    [
        "some months there is no income left for food or rent at all",
        "my income is low and the food bank helps us get through",
        "my pension covers the basics but nothing extra ever",
        "my retirement income is steady and we have a little saved",
        "my savings and investments mean income is never a concern",
    ],
    // Housing
    [
        "I have been sleeping in my car or a shelter since losing my housing",
        "the landlord keeps threatening eviction and the apartment has no heat",
        "the apartment is stable but the neighborhood is rough at night",
        "our home is safe and comfortable enough for the two of us",
        "we own a lovely house in a quiet and safe neighborhood",
    ],
    // Financial Stress
    [
        "I lie awake worrying whether we can afford the essentials",
        "every few months the bills pile up and I struggle to pay them",
        "money worries come and go but the expenses are manageable",
        "I pay the bills comfortably and rarely worry about expenses",
        "I never worry about money and feel completely secure financially",
    ],
    // Diet - Diet Type
    [
        "my diet is mostly fast food and processed meals from the freezer",
        "my meals are mostly unhealthy with a vegetable now and then",
        "my diet is a balanced mix of cooking at home with some indulgences",
        "my meals are mostly vegetables and lean protein with rare treats",
        "my diet is consistently healthy with fresh vegetables at every meal",
    ],
    // Food Preferences
    [
        "my favorite food is fried chicken and I crave sweets every day",
        "healthy food does not interest me much and snacks taste better",
        "I am open to trying healthier snacks when my daughter suggests them",
        "I prefer healthier food these days and try to avoid junk snacks",
        "I actively seek out nutritious food and love the taste of fresh greens",
    ],
    // Dietary Restrictions
    [
        "I ignore the sugar restrictions completely and eat whatever I want",
        "I try to cut carbs but I cheat on the restrictions almost right away",
        "I follow the sugar restrictions some days but not consistently",
        "I generally keep my rice portions small with an occasional slip",
        "I follow every dietary restriction on sugar and carbs without slips",
    ],
    // Social Support - Family Support
    [
        "I have no family support and feel isolated from my relatives",
        "my children help only once in a while and not reliably",
        "my spouse helps with some things but not everything",
        "my family is reliable and my children check on me every week",
        "my family is an exceptional network that supports me in everything",
    ],
    // Friends
    [
        "I have no friends left and nobody calls or visits",
        "I rarely see friends and the phone calls are few and far between",
        "a couple of friends give me some help and a listening ear",
        "my friends are a strong network and visit me consistently",
        "my friends are exceptionally dependable and always engaged in my life",
    ],
    // Social Networks
    [
        "I am completely disconnected from any community or groups",
        "I rarely join any group activities in the community",
        "I sometimes go to the church group and a local community club",
        "I am active in the community center and volunteering every week",
        "I am deeply involved in many clubs, groups and volunteering networks",
    ],
    // Health Services - Healthcare Utilization
    [
        "I have not seen a doctor in years and skip every checkup",
        "I only go to the emergency room when something goes wrong",
        "I get checkups at the clinic irregularly when I remember",
        "I keep consistent appointments at the clinic for my checkups",
        "I am very proactive with doctor visits and never miss an appointment",
    ],
    // Satisfaction with Services
    [
        "I am deeply dissatisfied with the providers and the care quality",
        "I am mostly dissatisfied with the nurses although a few are kind",
        "my feelings about the care quality are mixed but the basics are met",
        "I am generally satisfied with my providers and have no major issues",
        "I am extremely satisfied and fully trust my providers and nurses",
    ],
    // Barriers to Care
    [
        "the cost and lack of transportation keep me from getting care",
        "insurance problems and long waiting lists block my access to care",
        "there are some barriers to access like waiting but I manage",
        "there are few barriers and transportation to the clinic is easy",
        "I have no barriers to access care and insurance covers everything",
    ],
    // Information on Diabetes Management - Knowledge Level
    [
        "I have no knowledge about managing diabetes and nobody explained it",
        "I have very little understanding of what diabetes does to the body",
        "my knowledge of diabetes is moderate but there are gaps in my understanding",
        "I have a good understanding of diabetes from the education classes",
        "I have excellent knowledge and have studied diabetes education for years",
    ],
    // Self-Care Practices
    [
        "I do no exercise or glucose monitoring for my diabetes",
        "I rarely do any walking or check my glucose",
        "I do some walking and glucose monitoring but not a full routine",
        "I have a regular routine of walking and glucose monitoring",
        "my routine of exercise, foot care and glucose monitoring is thorough",
    ],
    // Medication Adherence
    [
        "I never take my medication on schedule",
        "I often forget my metformin pills and miss doses",
        "I take my medication most days but occasionally miss doses",
        "I take my insulin faithfully with only minor lapses",
        "I take every dose of my medication perfectly and never miss pills",
    ],
];

/// Code variants the mock theme extractor emits for each subtopic.
pub const SUBTOPIC_CODES: [[&str; 3]; 15] = [
    ["Income level", "Household income", "Income sources"],
    ["Housing situation", "Housing stability", "Home environment"],
    ["Financial stress", "Money worries", "Financial stress and bills"],
    ["Diet type", "Daily diet", "Diet quality"],
    ["Food preferences", "Favorite foods", "Food cravings"],
    ["Dietary restrictions", "Sugar restrictions", "Carb restrictions"],
    ["Family support", "Support from family", "Family help"],
    ["Friends", "Friend support", "Friendships"],
    ["Social networks", "Community involvement", "Community groups"],
    ["Healthcare utilization", "Doctor visits", "Clinic appointments"],
    ["Satisfaction with care", "Provider satisfaction", "Trust in providers"],
    ["Barriers to care", "Access barriers", "Care access barriers"],
    ["Diabetes knowledge", "Diabetes education", "Understanding diabetes"],
    ["Self-care practices", "Glucose monitoring", "Exercise routine"],
    ["Medication adherence", "Taking medication", "Missed doses"],
];

/// Sentence frames; `{}` is replaced by the phrase.
const FRAMES: [&str; 3] = ["Honestly, {}.", "I would say {}.", "These days {}."];

const FILLER: [&str; 32] = [
    "I grew up in a small town near the coast.",
    "My father worked at the shipyard for most of his life.",
    "We moved to the city when I was still in school.",
    "I used to love fishing on the lake in the summer.",
    "The winters back then were much colder than now.",
    "I spent many years working as a bookkeeper.",
    "Gardening has always been a quiet pleasure of mine.",
    "I like to read mystery novels in the afternoon.",
    "We had a dog named Rusty who lived a long time.",
    "I remember the old movie theater on Main Street.",
    "Traveling by train was something I always enjoyed.",
    "My mother taught me how to sew when I was young.",
    "I served in the army for a few years after school.",
    "The weather lately has been warm and dry.",
    "I enjoy watching baseball on television.",
    "There is a park down the street where the birds gather.",
    "I painted watercolors for a while but gave it up.",
    "My first job was delivering newspapers on a bicycle.",
    "We used to drive up into the mountains every fall.",
    "I learned to play the piano late in life.",
    "The old neighborhood has changed a lot over the decades.",
    "I like listening to the radio in the morning.",
    "I still keep a journal when something interesting happens.",
    "My grandfather told stories about crossing the ocean.",
    "I collected stamps for a long time as a hobby.",
    "Some afternoons I just sit on the porch and watch the street.",
    "I was always good with numbers in school.",
    "The library downtown is one of my favorite places.",
    "I never learned to swim properly, which is a little funny.",
    "We once took a long road trip across the desert.",
    "Crossword puzzles keep my mind busy in the evening.",
    "I like the smell of rain on a hot afternoon.",
];

/// A1C mention frames; `{}` is replaced by the value, always within a few
/// tokens of the mention.
const A1C_MENTIONS: [&str; 4] = [
    "My last A1C was {} according to the nurse.",
    "The doctor said my hemoglobin A1c came back at {} percent.",
    "At the checkup my HbA1c result was {} this time.",
    "They told me the A1C number was {} last spring.",
];

/// Numbers with no A1C context.
const DISTRACTORS: [&str; 4] = [
    "I walk about 3.5 miles on a good morning.",
    "The bus ride downtown takes 12 minutes.",
    "We planted 6 tomato plants in the backyard.",
    "The crossword book has 15 puzzles left in it.",
];

pub struct SentenceBank;

impl SentenceBank {
    pub fn planted_sentence(subtopic: usize, level: u8, frame: usize) -> String {
        let phrase = level_phrase(subtopic, level);
        let framed = FRAMES[frame % FRAMES.len()].replace("{}", phrase);
        // capitalise the first character
        let mut chars = framed.chars();
        match chars.next() {
            Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
            None => framed,
        }
    }

    pub fn filler(i: usize) -> &'static str {
        FILLER[i % FILLER.len()]
    }

    pub fn filler_count() -> usize {
        FILLER.len()
    }

    pub fn a1c_mention(i: usize, value: f64) -> String {
        A1C_MENTIONS[i % A1C_MENTIONS.len()].replace("{}", &format!("{value:.1}"))
    }

    pub fn distractor(i: usize) -> &'static str {
        DISTRACTORS[i % DISTRACTORS.len()]
    }

    pub fn frame_count() -> usize {
        FRAMES.len()
    }

    /// Finds the level whose phrase for `subtopic` occurs in `text`
    /// (case-insensitive, whitespace-collapsed). Returns the level and the
    /// byte span of the phrase in the normalised text.
    pub fn detect_level(subtopic: usize, text: &str) -> Option<u8> {
        let hay = normalise(text);
        (1..=5u8).find(|&level| hay.contains(&normalise(level_phrase(subtopic, level))))
    }

    /// Index of a "Topic - Subtopic" label in taxonomy order.
    pub fn subtopic_index(label: &str) -> Option<usize> {
        TAXONOMY
            .iter()
            .flat_map(|(t, subs)| subs.iter().map(move |s| subtopic_label(t, s)))
            .position(|l| l == label)
    }
}

pub fn level_phrase(subtopic: usize, level: u8) -> &'static str {
    assert!((1..=5).contains(&level), "level must be 1..=5");
    PHRASES[subtopic][usize::from(level - 1)]
}

fn normalise(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::verify_redaction;

    #[test]
    fn phrases_are_distinct_and_not_nested() {
        let all: Vec<String> = PHRASES.iter().flatten().map(|p| normalise(p)).collect();
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                if i != j {
                    assert!(!a.contains(b.as_str()), "{a:?} contains {b:?}");
                }
            }
        }
    }

    #[test]
    fn detect_level_round_trips() {
        for s in 0..15 {
            for level in 1..=5u8 {
                let sentence = SentenceBank::planted_sentence(s, level, usize::from(level));
                assert_eq!(SentenceBank::detect_level(s, &sentence), Some(level));
            }
        }
    }

    #[test]
    fn planted_material_carries_no_a1c_numbers() {
        for s in 0..15 {
            for level in 1..=5u8 {
                assert!(!level_phrase(s, level).chars().any(|c| c.is_ascii_digit()));
            }
        }
        for f in FILLER {
            assert!(verify_redaction(f).clean);
        }
        for i in 0..A1C_MENTIONS.len() {
            assert!(!verify_redaction(&SentenceBank::a1c_mention(i, 7.2)).clean);
        }
    }
}
