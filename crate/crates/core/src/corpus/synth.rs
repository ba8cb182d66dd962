//! Synthetic checklist corpora with planted structure.
//!
//! Labels are assigned first (exact fail count), then text and categorical
//! fields are drawn conditionally on the label so that classifiers have a
//! learnable but noisy signal spread across checklist text, focus points,
//! vendor and criticality. Exact duplicates and paraphrases are planted
//! inside the source record's (asset type, vendor, site) block.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::record::{CheckRecord, SeverityEvent, Status};
use super::CorpusError;
use crate::rng::{seeded, Rng};

const ASSET_TYPES: [&str; 8] = [
    "Electrical Panel",
    "Conveyor",
    "Safety Equipment",
    "HVAC Unit",
    "Fire Protection",
    "Lighting",
    "Dock Equipment",
    "Racking",
];

const COMPONENTS: [[&str; 12]; 8] = [
    ["breaker", "panel", "cable", "conduit", "fuse", "transformer", "terminal", "relay", "contactor", "busbar", "disconnect", "receptacle"],
    ["belt", "roller", "pulley", "idler", "sprocket", "chain", "gearbox", "motor", "bearing", "shaft", "coupling", "tensioner"],
    ["guard", "railing", "estop", "lanyard", "barrier", "interlock", "beacon", "horn", "signage", "gate", "fence", "mat"],
    ["damper", "duct", "compressor", "coil", "filter", "thermostat", "fan", "blower", "louver", "condenser", "chiller", "vent"],
    ["sprinkler", "extinguisher", "alarm", "detector", "hydrant", "valve", "riser", "strobe", "hose", "pump", "nozzle", "standpipe"],
    ["fixture", "lamp", "ballast", "lens", "bulb", "reflector", "sensor", "timer", "dimmer", "socket", "driver", "photocell"],
    ["ramp", "bumper", "shelter", "seal", "restraint", "door", "hinge", "spring", "latch", "track", "threshold", "plate"],
    ["upright", "beam", "brace", "anchor", "baseplate", "shelf", "deck", "shim", "column", "bolt", "bracket", "crossbar"],
];

const VERBS: [&str; 8] = ["verify", "inspect", "confirm", "ensure", "check", "validate", "examine", "observe"];

const CONDITIONS: [&str; 15] = [
    "installed", "aligned", "labeled", "tightened", "lubricated", "mounted", "connected", "calibrated",
    "clean", "operational", "intact", "level", "secured", "documented", "accessible",
];

const QUALIFIERS: [&str; 7] = ["properly", "fully", "correctly", "firmly", "evenly", "visibly", "safely"];

/// Checklist words whose presence is associated with failing audits.
pub const RISK_CUES: [&str; 16] = [
    "leak", "corrosion", "crack", "fraying", "overheating", "vibration", "looseness", "wear",
    "rust", "sparking", "smoke", "scorching", "dent", "exposure", "blockage", "slippage",
];

const LOCATIONS: [&str; 12] = [
    "upper", "lower", "left", "right", "inlet", "outlet", "front", "rear", "drive", "tail", "head", "center",
];

const UNITS: [&str; 5] = ["section", "assembly", "unit", "side", "end"];

/// Focus-point words associated with failing audits.
pub const FOCUS_CUES: [&str; 6] = ["joint", "seam", "splice", "flange", "weld", "contact"];

const VENDORS: [&str; 6] = ["AcmeCo", "Beltronix", "Conveyco", "Dynamo Systems", "Everline", "Fortis Industrial"];

/// Vendors over-represented among failing checks.
pub const RISKY_VENDORS: [&str; 2] = ["Beltronix", "Fortis Industrial"];

const SITES: [&str; 6] = ["FC-01", "FC-02", "FC-03", "FC-04", "FC-05", "FC-06"];

const OUTCOMES: [&str; 6] = ["injury", "fire", "outage", "jam", "shutdown", "spill"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_checks: usize,
    pub fail_fraction: f64,
    pub n_duplicate_pairs: usize,
    pub n_paraphrase_pairs: usize,
    /// Number of asset-type themes (1..=8), each with its own component vocabulary.
    pub vocab_themes: usize,
    /// Scales how often labels disagree with the risk cues: failing checks without a
    /// cue and passing checks with one. 1.0 is the default mix, 0.0 makes cues decisive.
    pub cue_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_checks: 1000,
            fail_fraction: 1.0 / 16.0,
            n_duplicate_pairs: 0,
            n_paraphrase_pairs: 0,
            vocab_themes: ASSET_TYPES.len(),
            cue_noise: 1.0,
            seed: 0,
        }
    }
}

/// What the generator planted, for scoring detectors against.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SynthTruth {
    /// Exact-duplicate pairs, each ordered (smaller id, larger id).
    pub duplicate_pairs: Vec<(String, String)>,
    pub paraphrase_pairs: Vec<(String, String)>,
    pub fail_cues: Vec<String>,
    pub focus_cues: Vec<String>,
    pub risky_vendors: Vec<String>,
}

#[derive(Debug, Clone)]
struct Draft {
    asset: usize,
    vendor: usize,
    site: Option<usize>,
    verb: usize,
    components: Vec<usize>,
    conditions: [usize; 2],
    qualifier: usize,
    risks: Vec<usize>,
    focus: Vec<String>,
    criticality: &'static str,
    layout: u8,
    typo: Option<usize>,
}

pub fn synthesize_corpus(config: &SynthConfig) -> Result<(Vec<CheckRecord>, SynthTruth), CorpusError> {
    let SynthConfig { n_checks, fail_fraction, n_duplicate_pairs, n_paraphrase_pairs, vocab_themes, cue_noise, seed } = *config;
    if n_checks < 10 {
        return Err(CorpusError::InvalidConfig(format!("n_checks must be >= 10, got {n_checks}")));
    }
    if !(fail_fraction > 0.0 && fail_fraction < 1.0) {
        return Err(CorpusError::InvalidConfig(format!("fail_fraction must be in (0, 1), got {fail_fraction}")));
    }
    if !(1..=ASSET_TYPES.len()).contains(&vocab_themes) {
        return Err(CorpusError::InvalidConfig(format!(
            "vocab_themes must be in 1..={}, got {vocab_themes}",
            ASSET_TYPES.len()
        )));
    }
    if !(0.0..=1.0).contains(&cue_noise) {
        return Err(CorpusError::InvalidConfig(format!("cue_noise must be in [0, 1], got {cue_noise}")));
    }
    let n_copies = n_duplicate_pairs + n_paraphrase_pairs;
    if 2 * n_copies > n_checks {
        return Err(CorpusError::InvalidConfig(format!(
            "{n_copies} planted pairs need at least {} checks",
            2 * n_copies
        )));
    }

    let mut rng = seeded(seed);
    let n_base = n_checks - n_copies;
    // Small epsilon so that e.g. 100 * 0.07 = 7.000000000000001 and 10000 / 16 floor as intended.
    let n_fail = (n_checks as f64 * fail_fraction + 1e-9).floor() as usize;

    // Which bases get planted copies, and which copy kind.
    let mut order: Vec<usize> = (0..n_base).collect();
    order.shuffle(&mut rng);
    let mut copy_kind = vec![None; n_base];
    for (k, &b) in order.iter().take(n_copies).enumerate() {
        copy_kind[b] = Some(k < n_duplicate_pairs);
    }

    // Distribute exactly n_fail labels; a source record carries its copy's label too.
    order.shuffle(&mut rng);
    let mut fail = vec![false; n_base];
    let mut remaining = n_fail;
    for &b in &order {
        let weight = if copy_kind[b].is_some() { 2 } else { 1 };
        if weight <= remaining {
            fail[b] = true;
            remaining -= weight;
        }
        if remaining == 0 {
            break;
        }
    }
    if remaining != 0 {
        return Err(CorpusError::InvalidConfig(format!(
            "cannot place exactly {n_fail} fail labels with {n_copies} planted pairs"
        )));
    }

    let mut drafts: Vec<(Draft, Status)> = Vec::with_capacity(n_checks);
    let mut pairs: Vec<(usize, usize, bool)> = Vec::with_capacity(n_copies);
    for b in 0..n_base {
        let status = if fail[b] { Status::Fail } else { Status::Pass };
        let draft = draw(&mut rng, status, vocab_themes, cue_noise);
        let src = drafts.len();
        drafts.push((draft.clone(), status));
        if let Some(exact) = copy_kind[b] {
            let copy = if exact { draft } else { paraphrase(&mut rng, &draft) };
            pairs.push((src, drafts.len(), exact));
            drafts.push((copy, status));
        }
    }

    // Shuffle positions so planted copies are not adjacent, then assign ids in output order.
    let mut slots: Vec<usize> = (0..drafts.len()).collect();
    slots.shuffle(&mut rng);
    let width = n_checks.to_string().len().max(5);
    let mut ids = vec![String::new(); drafts.len()];
    for (pos, &d) in slots.iter().enumerate() {
        ids[d] = format!("C-{:0width$}", pos + 1);
    }

    let mut records: Vec<CheckRecord> = slots
        .iter()
        .map(|&d| {
            let (draft, status) = &drafts[d];
            render(&mut rng, ids[d].clone(), draft, *status)
        })
        .collect();
    // Exact duplicates must match field for field, including the VQ draw.
    let index_of: std::collections::HashMap<&str, usize> =
        records.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    let mut truth = SynthTruth {
        fail_cues: RISK_CUES.iter().map(|s| s.to_string()).collect(),
        focus_cues: FOCUS_CUES.iter().map(|s| s.to_string()).collect(),
        risky_vendors: RISKY_VENDORS.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    let mut fixes = Vec::new();
    for &(src, copy, exact) in &pairs {
        let (a, b) = ordered(&ids[src], &ids[copy]);
        if exact {
            fixes.push((index_of[ids[src].as_str()], index_of[ids[copy].as_str()]));
            truth.duplicate_pairs.push((a, b));
        } else {
            truth.paraphrase_pairs.push((a, b));
        }
    }
    for (src, copy) in fixes {
        let id = records[copy].id.clone();
        records[copy] = CheckRecord { id, ..records[src].clone() };
    }
    truth.duplicate_pairs.sort();
    truth.paraphrase_pairs.sort();
    Ok((records, truth))
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a < b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

fn pick_distinct(rng: &mut Rng, n: usize, k: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, n, k).into_vec()
}

fn draw(rng: &mut Rng, status: Status, themes: usize, noise: f64) -> Draft {
    let failing = status == Status::Fail;
    let asset = rng.gen_range(0..themes);
    let vendor = if failing && rng.gen_bool(0.6) {
        let v = RISKY_VENDORS[rng.gen_range(0..RISKY_VENDORS.len())];
        VENDORS.iter().position(|x| *x == v).unwrap()
    } else {
        rng.gen_range(0..VENDORS.len())
    };
    let site = if rng.gen_bool(0.05) { None } else { Some(rng.gen_range(0..SITES.len())) };

    let n_risk = {
        let u: f64 = rng.gen();
        if failing {
            // no cue with probability 0.15 * noise; otherwise 1, 2 or 3 cues at 7:7:3
            let none = 0.15 * noise;
            let rest = (u - none) / (1.0 - none);
            match u {
                u if u < none => 0,
                _ if rest < 7.0 / 17.0 => 1,
                _ if rest < 14.0 / 17.0 => 2,
                _ => 3,
            }
        } else {
            // one cue with probability 0.25 * noise, two with 0.05 * noise
            match u {
                u if u < 0.25 * noise => 1,
                u if u < 0.30 * noise => 2,
                _ => 0,
            }
        }
    };
    let criticality = {
        let u: f64 = rng.gen();
        let (high, medium) = if failing { (0.5, 0.3) } else { (0.2, 0.4) };
        if u < high {
            "High"
        } else if u < high + medium {
            "Medium"
        } else {
            "Low"
        }
    };

    let n_comp = rng.gen_range(2..=3);
    let conds = pick_distinct(rng, CONDITIONS.len(), 2);
    let mut focus = Vec::new();
    if rng.gen_bool(0.9) {
        focus.push(LOCATIONS[rng.gen_range(0..LOCATIONS.len())].to_string());
        let cue_p = if failing { 0.45 } else { 0.10 };
        if rng.gen_bool(cue_p) {
            focus.push(FOCUS_CUES[rng.gen_range(0..FOCUS_CUES.len())].to_string());
        } else {
            focus.push(UNITS[rng.gen_range(0..UNITS.len())].to_string());
        }
    }
    Draft {
        asset,
        vendor,
        site,
        verb: rng.gen_range(0..VERBS.len()),
        components: pick_distinct(rng, 12, n_comp),
        conditions: [conds[0], conds[1]],
        qualifier: rng.gen_range(0..QUALIFIERS.len()),
        risks: pick_distinct(rng, RISK_CUES.len(), n_risk),
        focus,
        criticality,
        layout: rng.gen_range(0..3),
        typo: if rng.gen_bool(0.02) { Some(rng.gen_range(0..n_comp)) } else { None },
    }
}

/// Same asset, components, risks and focus; different verb, qualifier, one condition and phrasing.
fn paraphrase(rng: &mut Rng, d: &Draft) -> Draft {
    let mut p = d.clone();
    p.verb = (d.verb + rng.gen_range(1..VERBS.len())) % VERBS.len();
    p.qualifier = (d.qualifier + rng.gen_range(1..QUALIFIERS.len())) % QUALIFIERS.len();
    let fresh = loop {
        let c = rng.gen_range(0..CONDITIONS.len());
        if !d.conditions.contains(&c) {
            break c;
        }
    };
    p.conditions = [d.conditions[0], fresh];
    p.components.shuffle(rng);
    p.risks.shuffle(rng);
    p.layout = (d.layout + 1) % 3;
    p.typo = None;
    p
}

fn with_typo(word: &str) -> String {
    // Doubled interior letter: a distance-one misspelling.
    let mid = word.len() / 2;
    let (a, b) = word.split_at(mid);
    format!("{a}{}{b}", &b[..1])
}

fn render(rng: &mut Rng, id: String, d: &Draft, status: Status) -> CheckRecord {
    let comps: Vec<String> = d
        .components
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let w = COMPONENTS[d.asset][c];
            if d.typo == Some(i) {
                with_typo(w)
            } else {
                w.to_string()
            }
        })
        .collect();
    let comp_list = match comps.len() {
        2 => format!("{} and {}", comps[0], comps[1]),
        _ => format!("{}, {} and {}", comps[0], comps[1], comps[2]),
    };
    let verb = VERBS[d.verb];
    let (c1, c2) = (CONDITIONS[d.conditions[0]], CONDITIONS[d.conditions[1]]);
    let q = QUALIFIERS[d.qualifier];
    let mut text = match d.layout {
        0 => format!("{verb} the {comp_list} are {q} {c1} and {c2}"),
        1 => format!("{verb} that all {comp_list} are {c1}, {c2} {q}"),
        _ => format!("{verb} {comp_list} is {c1} and {q} {c2}"),
    };
    let risks: Vec<&str> = d.risks.iter().map(|&r| RISK_CUES[r]).collect();
    if !risks.is_empty() {
        let lead = match d.layout {
            0 => " with no ",
            1 => " and free of ",
            _ => " for signs of ",
        };
        text.push_str(lead);
        text.push_str(&risks.join(" or "));
    }
    let mut chars = text.chars();
    let text = match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => text,
    };

    let vq_status = match status {
        Status::Fail => Some(if rng.gen_bool(0.9) { Status::Pass } else { Status::Fail }),
        Status::Pass => Some(if rng.gen_bool(0.03) { Status::Fail } else { Status::Pass }),
    };
    CheckRecord {
        id,
        asset_type: ASSET_TYPES[d.asset].to_string(),
        vendor: VENDORS[d.vendor].to_string(),
        site: d.site.map(|s| SITES[s].to_string()),
        checklist_text: text,
        focus_points: d.focus.join(" "),
        criticality: d.criticality.to_string(),
        severity_score: None,
        severity_group: None,
        ioq_status: Some(status),
        vq_status,
    }
}

/// Incident descriptions themed like the checklist vocabulary.
pub fn synthesize_events(n_events: usize, vocab_themes: usize, seed: u64) -> Result<Vec<SeverityEvent>, CorpusError> {
    if n_events == 0 {
        return Err(CorpusError::InvalidConfig("n_events must be positive".into()));
    }
    if !(1..=ASSET_TYPES.len()).contains(&vocab_themes) {
        return Err(CorpusError::InvalidConfig(format!("vocab_themes must be in 1..={}", ASSET_TYPES.len())));
    }
    let mut rng = seeded(seed);
    let width = n_events.to_string().len().max(4);
    Ok((0..n_events)
        .map(|i| {
            let theme = rng.gen_range(0..vocab_themes);
            let comp = COMPONENTS[theme][rng.gen_range(0..12)];
            let risk = RISK_CUES[rng.gen_range(0..RISK_CUES.len())];
            let outcome = OUTCOMES[rng.gen_range(0..OUTCOMES.len())];
            SeverityEvent {
                id: format!("E-{:0width$}", i + 1),
                description: format!("{comp} {risk} caused {outcome} near {}", LOCATIONS[rng.gen_range(0..LOCATIONS.len())]),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fail_count_and_pairs() {
        let cfg = SynthConfig {
            n_checks: 100,
            fail_fraction: 0.0625,
            n_duplicate_pairs: 5,
            n_paraphrase_pairs: 0,
            vocab_themes: 8,
            cue_noise: 1.0,
            seed: 7,
        };
        let (recs, truth) = synthesize_corpus(&cfg).unwrap();
        assert_eq!(recs.len(), 100);
        assert_eq!(recs.iter().filter(|r| r.ioq_status == Some(Status::Fail)).count(), 6);
        assert_eq!(truth.duplicate_pairs.len(), 5);
        for (a, b) in &truth.duplicate_pairs {
            assert!(a < b);
            let ra = recs.iter().find(|r| &r.id == a).unwrap();
            let rb = recs.iter().find(|r| &r.id == b).unwrap();
            assert_eq!(ra.checklist_text, rb.checklist_text);
            assert_eq!((&ra.asset_type, &ra.vendor, &ra.site), (&rb.asset_type, &rb.vendor, &rb.site));
        }
    }

    #[test]
    fn no_pairs_requested() {
        let cfg = SynthConfig { n_checks: 50, seed: 3, ..Default::default() };
        let (_, truth) = synthesize_corpus(&cfg).unwrap();
        assert!(truth.duplicate_pairs.is_empty());
        assert!(truth.paraphrase_pairs.is_empty());
    }

    #[test]
    fn byte_identical_reruns() {
        let cfg = SynthConfig { n_checks: 300, n_duplicate_pairs: 4, n_paraphrase_pairs: 6, seed: 99, ..Default::default() };
        let dump = |c: &SynthConfig| {
            let (recs, truth) = synthesize_corpus(c).unwrap();
            let mut buf = Vec::new();
            super::super::io::write_jsonl(&recs, &mut buf).unwrap();
            (buf, truth)
        };
        assert_eq!(dump(&cfg), dump(&cfg));
    }

    #[test]
    fn fail_count_is_floor() {
        for (n, f) in [(10, 0.05), (10000, 1.0 / 16.0), (333, 0.3), (100, 0.07), (57, 0.5)] {
            let cfg = SynthConfig { n_checks: n, fail_fraction: f, n_paraphrase_pairs: n / 10, seed: 1, ..Default::default() };
            let (recs, _) = synthesize_corpus(&cfg).unwrap();
            let fails = recs.iter().filter(|r| r.ioq_status == Some(Status::Fail)).count();
            assert_eq!(fails, (n as f64 * f + 1e-9).floor() as usize, "n={n} f={f}");
        }
    }

    #[test]
    fn zero_noise_makes_cues_decisive() {
        let cfg = SynthConfig { n_checks: 400, fail_fraction: 0.25, cue_noise: 0.0, seed: 5, ..Default::default() };
        let (recs, _) = synthesize_corpus(&cfg).unwrap();
        for r in &recs {
            let text = r.checklist_text.to_lowercase();
            let cued = RISK_CUES.iter().any(|c| text.split(|ch: char| !ch.is_alphanumeric()).any(|w| w == *c));
            assert_eq!(cued, r.ioq_status == Some(Status::Fail), "{}", r.checklist_text);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let bad = [
            SynthConfig { n_checks: 9, ..Default::default() },
            SynthConfig { fail_fraction: 0.0, ..Default::default() },
            SynthConfig { fail_fraction: 1.0, ..Default::default() },
            SynthConfig { vocab_themes: 0, ..Default::default() },
            SynthConfig { n_checks: 10, n_duplicate_pairs: 6, ..Default::default() },
            SynthConfig { cue_noise: 1.5, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(synthesize_corpus(&cfg), Err(CorpusError::InvalidConfig(_))), "{cfg:?}");
        }
    }
}
