//! Text checkpoint of a trained model: extractor, per-domain meta-parameters,
//! optimizer moments, prototype stores, iteration counter and a config echo.
//!
//! ```text
//! cosml-checkpoint 1
//! iteration 500
//! domains 0 1 2 3
//! config {"n_way":5,...}
//! phi
//! manifest relu 2 8x64 ...
//! params 0 2 4736
//! ...
//! theta 0
//! manifest ...
//! adam 0 <t> <lr> <beta1> <beta2> <eps> <len>
//! ...m values... ...v values...
//! store <domain> <examples> <folded> <stored> <dim> <cap|-> <reservoir seed>
//! ...domain prototype... ...task prototypes...
//! end
//! ```

use super::state::MetaState;
use crate::error::Result;
use crate::ndcore::text::{TextReader, TextWriter};
use crate::ndcore::AdamState;
use crate::prototypes::PrototypeStore;
use crate::scalar::{format_exact, Scalar};

const HEADER: &str = "cosml-checkpoint";
const VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub state: MetaState<T>,
    pub stores: Vec<PrototypeStore<T>>,
    /// Single-line JSON of the configuration that produced the state.
    pub config_echo: String,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_text(&self) -> String {
        let mut w = TextWriter::new();
        w.line(format!("{HEADER} {VERSION}"));
        w.line(format!("iteration {}", self.state.iteration));
        let ids: Vec<String> = self
            .state
            .domain_ids
            .iter()
            .map(ToString::to_string)
            .collect();
        w.line(format!("domains {}", ids.join(" ")).trim_end());
        w.line(format!("config {}", self.config_echo.replace('\n', " ")));
        w.line("phi");
        w.params(&self.state.phi);
        for (k, (theta, opt)) in self
            .state
            .thetas
            .iter()
            .zip(&self.state.opt_states)
            .enumerate()
        {
            w.line(format!("theta {k}"));
            w.params(theta);
            w.line(format!(
                "adam {k} {} {} {} {} {} {}",
                opt.t,
                format_exact(opt.lr),
                format_exact(opt.beta1),
                format_exact(opt.beta2),
                format_exact(opt.eps),
                opt.len()
            ));
            w.floats(&opt.m);
            w.floats(&opt.v);
        }
        for s in &self.stores {
            let cap = s.cap().map_or_else(|| "-".to_string(), |c| c.to_string());
            w.line(format!(
                "store {} {} {} {} {} {cap} {}",
                s.domain_id(),
                s.example_count(),
                s.tasks_folded(),
                s.task_count(),
                s.feature_dim(),
                s.reservoir_seed()
            ));
            w.floats(s.domain_prototype());
            for z in s.task_prototypes() {
                w.floats(z);
            }
        }
        w.line("end");
        w.finish()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = TextReader::new(text);
        let version = r.expect_raw(HEADER)?;
        if version != VERSION {
            return Err(r.error(format!("unsupported checkpoint version `{version}`")));
        }
        let toks = r.expect("iteration")?;
        let iteration: usize = r.parse_token(toks.first(), "iteration")?;
        let toks = r.expect("domains")?;
        let domain_ids = toks
            .iter()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| r.error(format!("bad domain id `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let config_echo = r.expect_raw("config")?.to_string();
        r.expect("phi")?;
        let phi = r.params::<T>(None)?;

        let mut thetas = Vec::with_capacity(domain_ids.len());
        let mut opt_states = Vec::with_capacity(domain_ids.len());
        for k in 0..domain_ids.len() {
            let toks = r.expect("theta")?;
            if r.parse_token::<usize>(toks.first(), "theta index")? != k {
                return Err(r.error(format!("expected theta {k}")));
            }
            let shared = thetas
                .first()
                .map(|t: &crate::ndcore::ParamVector<T>| t.manifest().clone());
            thetas.push(r.params::<T>(shared.as_ref())?);
            let toks = r.expect("adam")?;
            let t: u64 = r.parse_token(toks.get(1), "adam step")?;
            let lr: T = r.parse_token(toks.get(2), "adam lr")?;
            let beta1: T = r.parse_token(toks.get(3), "adam beta1")?;
            let beta2: T = r.parse_token(toks.get(4), "adam beta2")?;
            let eps: T = r.parse_token(toks.get(5), "adam eps")?;
            let len: usize = r.parse_token(toks.get(6), "adam length")?;
            let m = r.floats(len)?;
            let v = r.floats(len)?;
            opt_states.push(AdamState {
                m,
                v,
                t,
                lr,
                beta1,
                beta2,
                eps,
            });
        }

        let mut stores = Vec::new();
        while r.peek_keyword() == Some("store") {
            let toks = r.expect("store")?;
            let domain: usize = r.parse_token(toks.first(), "store domain")?;
            let examples: u64 = r.parse_token(toks.get(1), "example count")?;
            let folded: u64 = r.parse_token(toks.get(2), "folded count")?;
            let stored: usize = r.parse_token(toks.get(3), "stored count")?;
            let dim: usize = r.parse_token(toks.get(4), "feature width")?;
            let cap = match toks.get(5) {
                Some(&"-") => None,
                other => Some(r.parse_token::<usize>(other, "cap")?),
            };
            let seed: u64 = r.parse_token(toks.get(6), "reservoir seed")?;
            let domain_prototype = r.floats(dim)?;
            let task_prototypes = (0..stored)
                .map(|_| r.floats(dim))
                .collect::<Result<Vec<_>>>()?;
            let store = PrototypeStore::from_parts(
                domain,
                task_prototypes,
                domain_prototype,
                examples,
                folded,
                cap,
                seed,
            )
            .map_err(|e| r.error(e.to_string()))?;
            stores.push(store);
        }
        r.expect("end")?;
        if !r.is_done() {
            return Err(r.error("content after `end`"));
        }
        let state = MetaState {
            thetas,
            opt_states,
            phi,
            domain_ids,
            iteration,
        };
        state.validate().map_err(|e| r.error(e.to_string()))?;
        Ok(Self {
            state,
            stores,
            config_echo,
        })
    }
}
