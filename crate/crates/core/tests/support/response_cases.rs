//! Loads `fixtures/responses.toml` and checks each case against the parsers.

use serde::Deserialize;

use sdoh_core::llm::{
    parse_a1c_prediction, parse_factor_bullets, parse_rating_block, parse_theme_json, FactorBullets, ParseError,
};

#[derive(Debug, Deserialize)]
pub struct Case {
    pub name: String,
    pub kind: String,
    pub input: String,
    pub codes: Option<usize>,
    pub first_code: Option<String>,
    pub issues: Option<usize>,
    pub error: Option<String>,
    #[serde(default)]
    pub no_information: bool,
    pub bullets: Option<usize>,
    pub rating: Option<i8>,
    pub quotes: Option<usize>,
    pub value: Option<f64>,
}

#[derive(Deserialize)]
struct File {
    case: Vec<Case>,
}

pub fn load() -> Vec<Case> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/responses.toml");
    let text = std::fs::read_to_string(path).expect("fixture file readable");
    toml::from_str::<File>(&text).expect("fixture file is valid").case
}

fn error_name(e: &ParseError) -> &'static str {
    match e {
        ParseError::NoJsonArray => "NoJsonArray",
        ParseError::MissingRating => "MissingRating",
        ParseError::BadRating(_) => "BadRating",
        ParseError::RatingOutOfRange(_) => "RatingOutOfRange",
    }
}

fn expect_eq<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: Option<T>) -> Result<(), String> {
    match want {
        Some(w) if w != got => Err(format!("{what}: got {got:?}, want {w:?}")),
        _ => Ok(()),
    }
}

/// `Ok` when the parse matches every expectation in the case.
pub fn check(case: &Case) -> Result<(), String> {
    match case.kind.as_str() {
        "theme" => match (parse_theme_json(&case.input), &case.error) {
            (Err(e), Some(want)) if error_name(&e) == want => Ok(()),
            (Err(e), _) => Err(format!("unexpected error {e}")),
            (Ok(_), Some(want)) => Err(format!("expected error {want}")),
            (Ok(t), None) => {
                expect_eq("codes", t.codes.len(), case.codes)?;
                expect_eq("issues", t.issues.len(), case.issues)?;
                expect_eq("first code", t.codes.first().map(|c| c.code.clone()), case.first_code.clone().map(Some))
            }
        },
        "factor" => match parse_factor_bullets(&case.input) {
            FactorBullets::NoInformation if case.no_information => Ok(()),
            FactorBullets::NoInformation => Err("unexpected no-information".into()),
            FactorBullets::Items { .. } if case.no_information => Err("expected no-information".into()),
            FactorBullets::Items { bullets, issues } => {
                expect_eq("bullets", bullets.len(), case.bullets)?;
                expect_eq("issues", issues.len(), case.issues)
            }
        },
        "rating" => match (parse_rating_block(&case.input), &case.error) {
            (Err(e), Some(want)) if error_name(&e) == want => Ok(()),
            (Err(e), _) => Err(format!("unexpected error {e}")),
            (Ok(r), Some(want)) => Err(format!("expected error {want}, got rating {}", r.rating)),
            (Ok(r), None) => {
                expect_eq("rating", r.rating, case.rating)?;
                expect_eq("quotes", r.quotes().len(), case.quotes)
            }
        },
        "prediction" => {
            let p = parse_a1c_prediction(&case.input);
            if p.value != case.value {
                return Err(format!("value: got {:?}, want {:?}", p.value, case.value));
            }
            expect_eq("quotes", p.quotes.len(), case.quotes)
        }
        other => Err(format!("unknown kind {other}")),
    }
}
