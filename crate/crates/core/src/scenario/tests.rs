use super::*;

#[test]
fn presets_resolve() {
    let c = Config::presets();
    for name in c.scenarios.keys() {
        c.scenario(name).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn user_config_may_name_preset_parts() {
    let user = Config::parse(
        "[scenarios.mine]\nmodel = \"cir\"\nmodulus = \"cir\"\nnoise = { case = \"case1\" }\nx0 = 1.0\ny0 = 0.5\n",
    )
    .unwrap();
    assert!(user.check_references().is_err());
    let merged = user.over_presets().unwrap();
    assert!(merged.scenario("mine").is_ok());

    let dangling = Config::parse("[scenarios.m]\nmodel = \"nope\"\nmodulus = \"cir\"\nnoise = { case = \"case1\" }\nx0 = 1.0\ny0 = 0.5\n").unwrap();
    assert!(dangling.over_presets().is_err());
}
