#![no_main]

use libfuzzer_sys::fuzz_target;
use narravine_questionnaires::tables::{parse_sus_csv, parse_ueq_csv, parse_votes_csv};
use narravine_questionnaires::{chi_square_gof, score_sus, score_ueq, Expected, ScaleMap};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_sus_csv(text) {
        for r in &rows {
            assert!((0.0..=100.0).contains(&score_sus(r)));
        }
    }
    if let Ok(rows) = parse_ueq_csv(text) {
        if let Ok(scales) = score_ueq(&rows, &ScaleMap::standard()) {
            for s in scales {
                assert!((-3.0..=3.0).contains(&s.mean));
            }
        }
    }
    if let Ok(votes) = parse_votes_csv(text) {
        if let Ok(fit) = chi_square_gof(&votes, &Expected::Uniform) {
            assert!(fit.p.is_nan() || (0.0..=1.0).contains(&fit.p));
        }
    }
});
