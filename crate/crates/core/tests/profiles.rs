use loudclass::bisgaard::{rmse, ProfileSet};
use sha2::{Digest, Sha256};

/// Pairwise RMSE between the profiles, rows and columns in N1..N7, S1..S3
/// order.
const PAIRWISE_RMSE: [[f64; 10]; 10] = [
    [0.000000000000, 14.853450777513, 29.325756597230, 46.097722286464, 59.065641450847, 71.212709539801, 84.709060908500, 12.747548783982, 36.305991241116, 45.449147406745],
    [14.853450777513, 0.000000000000, 14.769055487742, 31.829624565803, 44.756284474920, 56.838587244934, 70.400639201644, 14.426538046254, 24.849547279578, 30.862598724022],
    [29.325756597230, 14.769055487742, 0.000000000000, 17.175564037318, 30.310889132455, 42.145581025773, 55.795385113825, 25.544079548890, 19.251623308178, 18.114220932737],
    [46.097722286464, 31.829624565803, 17.175564037318, 0.000000000000, 13.919410907075, 25.223996511259, 38.898907439670, 41.503011938894, 26.469321865133, 14.426538046254],
    [59.065641450847, 44.756284474920, 30.310889132455, 13.919410907075, 0.000000000000, 13.133925536564, 25.799709300688, 55.147529409757, 38.608613028701, 22.036900871039],
    [71.212709539801, 56.838587244934, 42.145581025773, 25.223996511259, 13.133925536564, 0.000000000000, 14.075688260259, 66.134332989757, 46.723923208566, 31.034255267365],
    [84.709060908500, 70.400639201644, 55.795385113825, 38.898907439670, 25.799709300688, 14.075688260259, 0.000000000000, 80.019528866396, 60.570207197929, 44.342417615642],
    [12.747548783982, 14.426538046254, 25.544079548890, 41.503011938894, 55.147529409757, 66.134332989757, 80.019528866396, 0.000000000000, 26.751168198791, 39.851286052021],
    [36.305991241116, 24.849547279578, 19.251623308178, 26.469321865133, 38.608613028701, 46.723923208566, 60.570207197929, 26.751168198791, 0.000000000000, 20.615528128088],
    [45.449147406745, 30.862598724022, 18.114220932737, 14.426538046254, 22.036900871039, 31.034255267365, 44.342417615642, 39.851286052021, 20.615528128088, 0.000000000000],
];

#[test]
fn profile_table_matches_its_checksum() {
    let table = include_bytes!("../data/bisgaard_profiles.tsv");
    let recorded = include_str!("../data/bisgaard_profiles.sha256");
    assert_eq!(hex::encode(Sha256::digest(table)), recorded.trim());
}

#[test]
fn pairwise_rmse_is_frozen() {
    let set = ProfileSet::bisgaard();
    let profiles = set.profiles();
    for (i, a) in profiles.iter().enumerate() {
        for (j, b) in profiles.iter().enumerate() {
            let r = rmse(&a.as_audiogram(), b).unwrap();
            assert!((r - PAIRWISE_RMSE[i][j]).abs() < 1e-9, "{} vs {}: {r}", a.class, b.class);
        }
    }
}
