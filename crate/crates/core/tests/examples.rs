macro_rules! example {
    ($name:ident) => {
        mod $name {
            #![allow(dead_code)]
            include!(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/examples/",
                stringify!($name),
                ".rs"
            ));

            #[test]
            fn runs() {
                run_example().expect("example should run");
            }
        }
    };
}

example!(analytic_defaults);
example!(compare);
example!(config_json);
example!(custom_potential);
example!(export_tables);
example!(simulate);
example!(stage_tables);
example!(sweep);
example!(threshold_curves);
