#![allow(dead_code)]

use pcm_hems::optimizer::{ComfortBand, ComfortPenalty, SlotData, TemperatureGrid};
use pcm_hems::runner::{prepare_inputs, RunConfig, SiteConfig, SiteInputs};
use pcm_hems::thermal::{OutdoorRamp, Plant, ThermalState};

pub fn site(name: &str, city: &str) -> SiteConfig {
    SiteConfig { name: name.into(), city: city.into(), weather: None, pv: None, demand: None }
}

pub fn config(cities: &[&str], start_day: usize, days: usize) -> RunConfig {
    RunConfig {
        start_day,
        days,
        sites: cities.iter().map(|c| site(&format!("{}-1", c.to_lowercase()), c)).collect(),
        ..RunConfig::default()
    }
}

/// Synthetic inputs of one site.
pub fn site_inputs(city: &str, start_day: usize, days: usize) -> (RunConfig, SiteInputs) {
    let cfg = config(&[city], start_day, days);
    let inp = prepare_inputs(&cfg, None).unwrap().remove(0).unwrap();
    (cfg, inp)
}

pub struct Instance {
    pub cfg: RunConfig,
    pub plant: Plant,
    pub grid: TemperatureGrid,
    pub slots: Vec<SlotData>,
    pub initial: ThermalState,
}

impl Instance {
    pub fn new(city: &str, start_day: usize, days: usize, melting_point: Option<f64>) -> Self {
        let (cfg, inp) = site_inputs(city, start_day, days);
        let plant = cfg.building.plant(melting_point).unwrap();
        let grid = cfg.solver.grid().unwrap();
        let slots = inp.slot_data(&cfg.tariff);
        let initial = plant.reconstruct(cfg.initial_t_in, slots[0].t_out.start);
        Self { cfg, plant, grid, slots, initial }
    }

    pub fn comfort(&self) -> ComfortBand {
        self.cfg.solver.comfort
    }

    pub fn penalty(&self) -> ComfortPenalty {
        self.cfg.solver.penalty
    }
}

/// Slots with a constant outdoor temperature and flat prices.
pub fn flat_slots(n: usize, t_out: f64, demand_kwh: f64, pv_kwh: f64) -> Vec<SlotData> {
    vec![
        SlotData {
            t_out: OutdoorRamp::constant(t_out),
            pv_kwh,
            demand_kwh,
            import_price: 0.25,
            feed_in_price: 0.09,
        };
        n
    ]
}

/// Keys whose values are wall-clock measurements or describe how the run
/// was scheduled rather than what it computed.
pub fn is_volatile_key(k: &str) -> bool {
    k.ends_with("seconds") || k.ends_with("_ns") || k == "speedup" || k == "execution"
}

fn strip(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.retain(|k, _| !is_volatile_key(k));
            m.values_mut().for_each(strip);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip),
        _ => {}
    }
}

/// Every file under `root` by relative path, JSON files with their
/// volatile fields removed.
pub fn snapshot(root: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut std::collections::BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
                continue;
            }
            let mut bytes = std::fs::read(&p).unwrap();
            if p.extension().is_some_and(|x| x == "json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                strip(&mut v);
                bytes = serde_json::to_vec_pretty(&v).unwrap();
            }
            out.insert(p.strip_prefix(root).unwrap().display().to_string(), bytes);
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Names of the files that differ between two snapshots.
pub fn differing(
    a: &std::collections::BTreeMap<String, Vec<u8>>,
    b: &std::collections::BTreeMap<String, Vec<u8>>,
) -> Vec<String> {
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter().filter(|k| a.get(*k) != b.get(*k)).cloned().collect()
}
