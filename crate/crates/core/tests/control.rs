mod common;

use common::Instance;
use pcm_hems::control::{band_excursion, simulate_deadband};

#[test]
fn pcm_reduces_deadband_toggling() {
    for (city, day) in [("Melbourne", 180), ("Perth", 15)] {
        let bare = Instance::new(city, day, 7, None);
        let pcm = Instance::new(city, day, 7, Some(21.0));
        let run = |i: &Instance| {
            simulate_deadband(&i.plant, &i.slots, i.initial, &i.cfg.deadband, &i.comfort(), &i.penalty()).unwrap().0
        };
        let (a, b) = (run(&bare), run(&pcm));
        assert!(b.toggles() < a.toggles(), "{city}: {} toggles with PCM vs {} without", b.toggles(), a.toggles());
        assert!(band_excursion(&b, &pcm.cfg.deadband) < 1.0);
    }
}
