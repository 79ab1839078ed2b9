use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::registry::{find_conversion, Conversion, Inputs, Params};
use super::ConvertError;
use crate::detect::FormatId;
use crate::Warning;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConversionPlan {
    pub steps: Vec<String>,
    pub required_external_inputs: BTreeSet<FormatId>,
    pub produced: BTreeSet<FormatId>,
}

impl ConversionPlan {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

fn mask_of<'a>(formats: impl IntoIterator<Item = &'a FormatId>) -> u16 {
    formats.into_iter().fold(0, |m, f| m | f.bit())
}

/// Shortest sequence of conversions that turns `start` into a set holding
/// `goal`; among equally short ones, the smallest by conversion ids.
fn search(start: u16, goal: FormatId, registry: &[Conversion]) -> Option<Vec<usize>> {
    let mut order: Vec<usize> = (0..registry.len()).collect();
    order.sort_by_key(|&i| registry[i].id);
    let ids = |path: &[usize]| path.iter().map(|&i| registry[i].id).collect::<Vec<_>>();

    let mut visited = HashSet::from([start]);
    let mut frontier: BTreeMap<u16, Vec<usize>> = BTreeMap::from([(start, Vec::new())]);
    while !frontier.is_empty() {
        let mut next: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
        for (&mask, path) in &frontier {
            for &ci in &order {
                let c = &registry[ci];
                let needs = mask_of(c.inputs);
                if needs & mask != needs || mask & c.output.bit() != 0 {
                    continue;
                }
                let reached = mask | c.output.bit();
                if visited.contains(&reached) {
                    continue;
                }
                let mut candidate = path.clone();
                candidate.push(ci);
                let better = match next.get(&reached) {
                    Some(existing) => ids(&candidate) < ids(existing),
                    None => true,
                };
                if better {
                    next.insert(reached, candidate);
                }
            }
        }
        let done = next
            .iter()
            .filter(|(m, _)| *m & goal.bit() != 0)
            .map(|(_, p)| p)
            .min_by(|a, b| ids(a).cmp(&ids(b)));
        if let Some(path) = done {
            return Some(path.clone());
        }
        visited.extend(next.keys().copied());
        frontier = next;
    }
    None
}

/// Plans the fewest conversions that produce `goal` from formats already in
/// hand. When nothing works, the error lists every smallest set of extra
/// formats that would make a plan possible.
pub fn plan_pipeline(
    available: &BTreeSet<FormatId>,
    goal: FormatId,
    registry: &[Conversion],
) -> Result<ConversionPlan, ConvertError> {
    if available.contains(&goal) {
        return Ok(ConversionPlan::default());
    }
    let start = mask_of(available);
    if let Some(path) = search(start, goal, registry) {
        let mut plan = ConversionPlan::default();
        for ci in path {
            let c = &registry[ci];
            for f in c.inputs {
                if !plan.produced.contains(f) {
                    plan.required_external_inputs.insert(*f);
                }
            }
            plan.steps.push(c.id.to_string());
            plan.produced.insert(c.output);
        }
        return Ok(plan);
    }

    let extra: Vec<FormatId> =
        FormatId::ALL.into_iter().filter(|f| *f != goal && !available.contains(f)).collect();
    let mut subsets: Vec<Vec<FormatId>> = (1u32..1 << extra.len())
        .map(|bits| (0..extra.len()).filter(|i| bits & (1 << i) != 0).map(|i| extra[i]).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let mut missing: Vec<Vec<FormatId>> = Vec::new();
    for s in subsets {
        if missing.iter().any(|m| m.iter().all(|f| s.contains(f))) {
            continue;
        }
        if search(start | mask_of(&s), goal, registry).is_some() {
            missing.push(s);
        }
    }
    Err(ConvertError::NoPlan { goal, missing })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineOutput {
    /// Inputs plus everything the plan produced.
    pub artifacts: Inputs,
    pub warnings: Vec<Warning>,
}

/// Runs the steps in order. Each step sees only the parameters it accepts;
/// a parameter no step accepts is an error.
pub fn run_pipeline(plan: &ConversionPlan, inputs: Inputs, params: &Params) -> Result<PipelineOutput, ConvertError> {
    let steps = plan.steps.iter().map(|s| find_conversion(s)).collect::<Result<Vec<_>, _>>()?;
    if !steps.is_empty() {
        if let Some(key) = params.keys().find(|k| !steps.iter().any(|c| c.accepts(k))) {
            return Err(ConvertError::InvalidParam { key: key.clone(), reason: "no step in the plan accepts it".into() });
        }
    }
    let mut out = PipelineOutput { artifacts: inputs, warnings: Vec::new() };
    for c in steps {
        if let Some(f) = c.inputs.iter().find(|f| !out.artifacts.contains_key(f)) {
            return Err(ConvertError::MissingInput { step: c.id.to_string(), format: *f });
        }
        let own: Params = params.iter().filter(|(k, _)| c.accepts(k)).map(|(k, v)| (k.clone(), v.clone())).collect();
        let (artifact, warnings) = c
            .run(&out.artifacts, &own)
            .map_err(|e| ConvertError::Step { step: c.id.to_string(), source: Box::new(e) })?;
        out.warnings.extend(warnings.into_iter().map(|w| Warning::new(format!("{}: {}", c.id, w.at), w.message)));
        out.artifacts.insert(c.output, artifact);
    }
    Ok(out)
}
