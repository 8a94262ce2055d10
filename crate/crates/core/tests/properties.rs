mod common;

macro_rules! property {
    ($($name:ident),*) => {
        $(
            #[test]
            fn $name() {
                common::$name().unwrap();
            }
        )*
    };
}

property!(
    pbw_confluence,
    normal_order_idempotent,
    multiply_respects_filtrations,
    pr_projection,
    pr_action_agrees,
    comultiply_multiplicative,
    comultiply_brackets,
    chi_right_linear,
    lift_factorization,
    action_weights
);
