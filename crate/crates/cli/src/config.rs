//! Scenario configs: which protocol, inputs, provers and limits to run.

use std::fs;
use std::path::Path;

use ipslab_core::harness::TrialPlan;
use ipslab_core::langspace::LanguageSpec;
use ipslab_core::protocols::{expected_membership, ProtocolContext, ProtocolId, ProtocolParams};
use ipslab_core::provers::{cheat_catalog, ProverSpec};
use ipslab_core::runtime::ResourceBudget;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::generators::Generator;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InputItem {
    Word(String),
    Generated(Generator),
}

/// One or more inputs. A string containing `(` is a generator, any other
/// string a literal word; `{"word": ...}` forces a literal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub struct InputSpec(pub Vec<InputItem>);

fn input_item(v: &Value) -> Result<InputItem, String> {
    match v {
        Value::String(s) if s.contains('(') => s
            .parse()
            .map(InputItem::Generated)
            .map_err(|e: CliError| e.to_string()),
        Value::String(s) => Ok(InputItem::Word(s.clone())),
        Value::Object(map) => match (map.get("word"), map.get("generate"), map.len()) {
            (Some(Value::String(w)), None, 1) => Ok(InputItem::Word(w.clone())),
            (None, Some(Value::String(g)), 1) => g
                .parse()
                .map(InputItem::Generated)
                .map_err(|e: CliError| e.to_string()),
            _ => Err(format!(
                "input object must be {{\"word\": ..}} or {{\"generate\": ..}}, got {v}"
            )),
        },
        _ => Err(format!(
            "input must be a string, an object or a list of them, got {v}"
        )),
    }
}

impl TryFrom<Value> for InputSpec {
    type Error = String;

    fn try_from(v: Value) -> Result<Self, String> {
        let items = match &v {
            Value::Array(xs) if xs.is_empty() => return Err("input list is empty".into()),
            Value::Array(xs) => xs.iter().map(input_item).collect::<Result<_, _>>()?,
            other => vec![input_item(other)?],
        };
        Ok(InputSpec(items))
    }
}

impl From<InputSpec> for Value {
    fn from(spec: InputSpec) -> Value {
        let item = |i: &InputItem| match i {
            InputItem::Word(w) if w.contains('(') => serde_json::json!({ "word": w }),
            InputItem::Word(w) => Value::String(w.clone()),
            InputItem::Generated(g) => Value::String(g.to_string()),
        };
        match spec.0.as_slice() {
            [one] => item(one),
            many => Value::Array(many.iter().map(item).collect()),
        }
    }
}

/// Short printable name of a word.
pub fn word_label(w: &[u8]) -> String {
    if w.is_empty() {
        "<empty>".into()
    } else if w.iter().all(|&s| s == w[0]) && w.len() > 3 {
        format!("{}^{}", w[0] as char, w.len())
    } else if w.len() <= 24 {
        String::from_utf8_lossy(w).into_owned()
    } else {
        format!(
            "{}..({} symbols)",
            String::from_utf8_lossy(&w[..12]),
            w.len()
        )
    }
}

impl InputSpec {
    /// Every word with a label naming where it came from.
    pub fn expand(&self) -> Vec<(String, Vec<u8>)> {
        let mut out = Vec::new();
        for item in &self.0 {
            match item {
                InputItem::Word(w) => out.push((word_label(w.as_bytes()), w.as_bytes().to_vec())),
                InputItem::Generated(g) => {
                    let words = g.words();
                    let single = words.len() == 1;
                    for (i, w) in words.into_iter().enumerate() {
                        let label = if single {
                            g.to_string()
                        } else {
                            format!("{g}[{i}] {}", word_label(&w))
                        };
                        out.push((label, w));
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CatalogFilter {
    All,
    Finite,
    Infinite,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProverItem {
    Spec(ProverSpec),
    Catalog(CatalogFilter),
}

/// Prover strategies: a spec object, a bare id such as `"honest"`, one of
/// `"catalog"`, `"finite-catalog"`, `"infinite-catalog"`, or a list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub struct ProverChoice(pub Vec<ProverItem>);

impl Default for ProverChoice {
    fn default() -> Self {
        ProverChoice(vec![ProverItem::Spec(ProverSpec::Honest)])
    }
}

fn prover_item(v: &Value) -> Result<ProverItem, String> {
    let spec = |v: Value| {
        serde_json::from_value::<ProverSpec>(v)
            .map(ProverItem::Spec)
            .map_err(|e| e.to_string())
    };
    match v {
        Value::String(s) => match s.as_str() {
            "catalog" => Ok(ProverItem::Catalog(CatalogFilter::All)),
            "finite-catalog" => Ok(ProverItem::Catalog(CatalogFilter::Finite)),
            "infinite-catalog" => Ok(ProverItem::Catalog(CatalogFilter::Infinite)),
            id => spec(serde_json::json!({ "id": id })),
        },
        Value::Object(_) => spec(v.clone()),
        _ => Err(format!(
            "prover must be a string, an object or a list of them, got {v}"
        )),
    }
}

impl TryFrom<Value> for ProverChoice {
    type Error = String;

    fn try_from(v: Value) -> Result<Self, String> {
        let items = match &v {
            Value::Array(xs) if xs.is_empty() => return Err("prover list is empty".into()),
            Value::Array(xs) => xs.iter().map(prover_item).collect::<Result<_, _>>()?,
            other => vec![prover_item(other)?],
        };
        Ok(ProverChoice(items))
    }
}

impl From<ProverChoice> for Value {
    fn from(choice: ProverChoice) -> Value {
        let item = |i: &ProverItem| match i {
            ProverItem::Spec(s) => serde_json::to_value(s).expect("prover specs serialize"),
            ProverItem::Catalog(CatalogFilter::All) => Value::String("catalog".into()),
            ProverItem::Catalog(CatalogFilter::Finite) => Value::String("finite-catalog".into()),
            ProverItem::Catalog(CatalogFilter::Infinite) => {
                Value::String("infinite-catalog".into())
            }
        };
        match choice.0.as_slice() {
            [one] => item(one),
            many => Value::Array(many.iter().map(item).collect()),
        }
    }
}

impl ProverChoice {
    pub fn expand(&self, protocol: ProtocolId, input: &[u8]) -> Vec<ProverSpec> {
        let mut out = Vec::new();
        for item in &self.0 {
            match item {
                ProverItem::Spec(s) => out.push(s.clone()),
                ProverItem::Catalog(filter) => {
                    out.extend(cheat_catalog(protocol, input).into_iter().filter(
                        |s| match filter {
                            CatalogFilter::All => true,
                            CatalogFilter::Finite => s.is_finite(),
                            CatalogFilter::Infinite => !s.is_finite(),
                        },
                    ))
                }
            }
        }
        out
    }
}

fn default_trials() -> u64 {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub protocol: ProtocolId,
    pub input: InputSpec,
    #[serde(default)]
    pub language: Option<LanguageSpec>,
    #[serde(default)]
    pub prover: ProverChoice,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub budget: ResourceBudget,
    #[serde(default)]
    pub params: ProtocolParams,
}

/// One (input, prover) pair of a scenario.
#[derive(Clone, Debug)]
pub struct Case {
    pub input_label: String,
    pub plan: TrialPlan,
    /// Whether the input is in the decided language, when that is defined.
    pub member: Option<bool>,
}

/// Command-line overrides applied on top of a config.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub budget_steps: Option<u64>,
    pub workers: Option<usize>,
}

impl Overrides {
    pub fn budget(&self, mut budget: ResourceBudget) -> ResourceBudget {
        if let Some(s) = self.budget_steps {
            budget.max_steps = s;
        }
        budget
    }
}

impl ScenarioConfig {
    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.protocol.to_string())
    }

    pub fn trials(&self, o: &Overrides) -> CliResult<u64> {
        let t = o.trials.unwrap_or(self.trials);
        if t == 0 {
            return Err(CliError::Config("trials must be positive".into()));
        }
        Ok(t)
    }

    pub fn context(&self) -> CliResult<ProtocolContext> {
        if self.protocol.needs_spec() && self.language.is_none() {
            return Err(CliError::Config(format!(
                "{} needs a \"language\"",
                self.protocol
            )));
        }
        self.params.validate()?;
        Ok(ProtocolContext::new(
            self.language.clone(),
            self.params.clone(),
        ))
    }

    /// Every (input, prover) case, validated.
    pub fn cases(&self, o: &Overrides) -> CliResult<Vec<Case>> {
        let ctx = self.context()?;
        let budget = o.budget(self.budget);
        budget.validate()?;
        let mut cases = Vec::new();
        for (label, word) in self.input.expand() {
            // the set verifiers read DIMA2 or unary words, not words over the index alphabet
            let over_spec = !matches!(
                self.protocol,
                ProtocolId::Dima2Set | ProtocolId::Upower64Set
            );
            if let (Some(spec), true) = (&self.language, over_spec) {
                spec.alphabet().check_word(&word)?;
            }
            let member = expected_membership(self.protocol, &word, self.language.as_ref())?;
            let provers = self.prover.expand(self.protocol, &word);
            if provers.is_empty() {
                return Err(CliError::Config(format!(
                    "no prover strategies for {} on {label}",
                    self.protocol
                )));
            }
            for prover in provers {
                cases.push(Case {
                    input_label: label.clone(),
                    plan: TrialPlan::new(self.protocol, word.clone(), prover, ctx.clone())
                        .with_budget(budget),
                    member,
                });
            }
        }
        Ok(cases)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioConfig, serde_json::Error> {
        serde_json::from_str(text)
    }

    #[test]
    fn minimal_scenario() {
        let c = parse(r#"{"protocol":"thm6-usquare","input":"usquare-member(3)"}"#).unwrap();
        assert_eq!(c.trials, 1000);
        assert_eq!(c.prover, ProverChoice::default());
        let cases = c.cases(&Overrides::default()).unwrap();
        assert_eq!(cases.len(), 1);
        assert_eq!(cases[0].plan.input, vec![b'a'; 9]);
        assert_eq!(cases[0].member, Some(true));
    }

    #[test]
    fn inputs_and_provers() {
        let c = parse(r#"{"protocol":"thm6-usquare","input":["aaaaa",{"generate":"unary(6)"}],"prover":["honest","finite-catalog",{"id":"periodic-blocks","m":2}]}"#)
            .unwrap();
        let cases = c.cases(&Overrides::default()).unwrap();
        let finite = cheat_catalog(ProtocolId::Usquare, b"aaaaa")
            .iter()
            .filter(|s| s.is_finite())
            .count();
        assert_eq!(cases.len(), 2 * (2 + finite));
        assert!(cases.iter().all(|c| c.member == Some(false)));
        let back: ScenarioConfig =
            serde_json::from_value(serde_json::to_value(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn config_errors() {
        assert!(parse(r#"{"protocol":"thm6-usquare"}"#).is_err());
        assert!(parse(r#"{"protocol":"nope","input":"a"}"#).is_err());
        assert!(parse(r#"{"protocol":"thm6-usquare","input":"a","typo":1}"#).is_err());
        assert!(parse(r#"{"protocol":"thm6-usquare","input":"usquare-member(x)"}"#).is_err());
        assert!(parse(r#"{"protocol":"thm6-usquare","input":"a","prover":"no-such"}"#).is_err());
        let needs_lang =
            parse(r#"{"protocol":"thm9-dima2-set","input":"dima2-member(1)"}"#).unwrap();
        assert!(needs_lang.cases(&Overrides::default()).is_err());
        let bad_q = parse(r#"{"protocol":"fact3-tape","input":"ab","params":{"q":250}}"#).unwrap();
        assert!(bad_q.cases(&Overrides::default()).is_err());
        let o = Overrides {
            budget_steps: Some(0),
            ..Overrides::default()
        };
        let ok = parse(r#"{"protocol":"thm6-usquare","input":"a"}"#).unwrap();
        assert!(ok.cases(&o).is_err());
    }
}
