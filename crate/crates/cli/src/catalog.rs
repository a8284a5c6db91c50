//! Bundled scenarios. Each acceptance criterion of the test suite maps to
//! exactly one scenario here; two extras cover the steady-rotation sanity
//! run and the must-fail measure control.

pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    /// Acceptance-criterion number this scenario exercises, if any.
    pub criterion: Option<u8>,
    /// True for negative controls whose checks are expected to fail
    /// (exit code 2).
    pub expect_check_failure: bool,
    pub config: &'static str,
}

pub const SCENARIOS: &[Scenario] = &[
    Scenario {
        name: "spherical-conservation",
        description:
            "spherical bearing, two balls: first-integral drift and rolling residuals over t=10",
        criterion: Some(1),
        expect_check_failure: false,
        config: include_str!("../scenarios/spherical-conservation.json"),
    },
    Scenario {
        name: "spherical-measure",
        description:
            "spherical invariant measure: pointwise divergence identity and tangent-flow transport",
        criterion: Some(2),
        expect_check_failure: false,
        config: include_str!("../scenarios/spherical-measure.json"),
    },
    Scenario {
        name: "spherical-reconstruction",
        description:
            "full attitude reconstruction: fixed-frame ball kinematics and rotation orthogonality",
        criterion: Some(3),
        expect_check_failure: false,
        config: include_str!("../scenarios/spherical-reconstruction.json"),
    },
    Scenario {
        name: "spherical-constraints",
        description: "three balls: rolling-constraint identities at every sampled state",
        criterion: Some(4),
        expect_check_failure: false,
        config: include_str!("../scenarios/spherical-constraints.json"),
    },
    Scenario {
        name: "planar-oracle",
        description: "planar bearing vs the multiplier formulation: trajectory-level equivalence",
        criterion: Some(5),
        expect_check_failure: false,
        config: include_str!("../scenarios/planar-oracle.json"),
    },
    Scenario {
        name: "planar-conservation",
        description:
            "planar bearing: f1..f4 drift, triangle congruence, and the measure identity over t=10",
        criterion: Some(6),
        expect_check_failure: false,
        config: include_str!("../scenarios/planar-conservation.json"),
    },
    Scenario {
        name: "planar-quadrature",
        description:
            "zero-momentum level set: trigonometric closed form vs integration, frozen v_phi",
        criterion: Some(7),
        expect_check_failure: false,
        config: include_str!("../scenarios/planar-quadrature.json"),
    },
    Scenario {
        name: "spherical-fixed-centers",
        description:
            "kinematic-ratio override 1 (fixed centers in space): coupling commutator identity",
        criterion: Some(8),
        expect_check_failure: false,
        config: include_str!("../scenarios/spherical-fixed-centers.json"),
    },
    Scenario {
        name: "integrator-order",
        description: "step-halving convergence study on the spherical reduced flow",
        criterion: Some(9),
        expect_check_failure: false,
        config: include_str!("../scenarios/integrator-order.json"),
    },
    Scenario {
        name: "spherical-steady",
        description:
            "steady rotation about a principal axis: every drift field at machine precision",
        criterion: None,
        expect_check_failure: false,
        config: include_str!("../scenarios/spherical-steady.json"),
    },
    Scenario {
        name: "measure-negative-control",
        description: "unit density instead of sqrt(det): the transport check must fail (exit 2)",
        criterion: None,
        expect_check_failure: true,
        config: include_str!("../scenarios/measure-negative-control.json"),
    },
];

pub fn find(name: &str) -> Option<&'static Scenario> {
    SCENARIOS.iter().find(|s| s.name == name)
}

pub fn listing() -> String {
    let mut out = String::from("bundled scenarios:\n");
    for s in SCENARIOS {
        let tag = match (s.criterion, s.expect_check_failure) {
            (Some(c), _) => format!(" [criterion {c}]"),
            (None, true) => " [negative control]".to_string(),
            (None, false) => String::new(),
        };
        out.push_str(&format!("  {:<26} {}{}\n", s.name, s.description, tag));
    }
    out
}
