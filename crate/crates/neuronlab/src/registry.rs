//! Named experiments with their default trial counts and settings.

use crate::experiments::{self, Runner};

pub struct Entry {
    pub name: &'static str,
    pub summary: &'static str,
    pub trials: usize,
    pub defaults: &'static [(&'static str, &'static str)],
    pub runner: Runner,
}

macro_rules! with_gaussian_relu {
    ($($k:literal => $v:literal),* $(,)?) => {
        &[
            ("dist", "gaussian"),
            ("act", "relu@0"),
            ("target", "e1"),
            ("alpha", "1"),
            ("beta", "0.09653"),
            ("gamma", "1"),
            $(($k, $v)),*
        ]
    };
}

pub static REGISTRY: &[Entry] = &[
    Entry {
        name: "thm31_failure",
        summary: "GD from a product init fails on the adversarial instance",
        trials: 1000,
        defaults: &[
            ("dim", "20"),
            ("method", "gd"),
            ("eta", "0.1"),
            ("horizon", "10000"),
            ("init", "xavier"),
            ("save_trajectories", "3"),
            ("save_stride", "100"),
        ],
        runner: experiments::thm31_failure,
    },
    Entry {
        name: "thm33_strict_rate",
        summary: "linear rate for activations with a positive derivative floor",
        trials: 20,
        defaults: &[
            ("acts", "identity;leaky_relu:0.5"),
            ("dims", "2,3,4,5"),
            ("atoms", "20000"),
            ("eta_fraction", "0.5"),
            ("steps", "200"),
        ],
        runner: experiments::thm33_strict_rate,
    },
    Entry {
        name: "thm42_correlation",
        summary: "gradient correlates with w - v inside the angle cone",
        trials: 100,
        defaults: with_gaussian_relu!("dim" => "5", "samples" => "1000000", "max_angle" => "3*pi/4"),
        runner: experiments::thm42_correlation,
    },
    Entry {
        name: "lemB1_pie_slice",
        summary: "planar pie-slice integral lower bound",
        trials: 1,
        defaults: &[
            ("alphas", "0.5,1,2"),
            ("deltas", "pi/8,pi/4,pi/2,pi"),
            ("directions", "360"),
            ("radial_nodes", "128"),
            ("angular_nodes", "512"),
        ],
        runner: experiments::lemb1_pie_slice,
    },
    Entry {
        name: "lem51_init_prob",
        summary: "probability that a Gaussian init lands near the target",
        trials: 1,
        defaults: &[("dims", "5,10,20"), ("draws", "100000"), ("tau", "auto")],
        runner: experiments::lem51_init_prob,
    },
    Entry {
        name: "thm53_gd_rate",
        summary: "GD contracts at the certified rate near the target",
        trials: 20,
        defaults: with_gaussian_relu!("dim" => "5", "dist_sq0" => "0.81", "steps" => "1000"),
        runner: experiments::thm53_gd_rate,
    },
    Entry {
        name: "thm53_sgd",
        summary: "SGD reaches the target with the certified step and horizon",
        trials: 50,
        defaults: with_gaussian_relu!(
            "dim" => "5",
            "dist_sq0" => "0.16",
            "eps1" => "0.2",
            "eps2" => "0.05",
            "delta_fail" => "0.1",
            "eta" => "auto",
            "max_iterations" => "1000000",
        ),
        runner: experiments::thm53_sgd,
    },
    Entry {
        name: "lem61_angle",
        summary: "angle to the target never increases along gradient flow",
        trials: 50,
        defaults: with_gaussian_relu!("dim" => "5", "t_max" => "30", "eps" => "pi/4", "flow_tol" => "1e-8"),
        runner: experiments::lem61_angle,
    },
    Entry {
        name: "lem62_norm_region",
        summary: "small-norm region where the flow increases |w|",
        trials: 20,
        defaults: with_gaussian_relu!("dim" => "5", "samples" => "1000000"),
        runner: experiments::lem62_norm_region,
    },
    Entry {
        name: "thm63_flow_rate",
        summary: "exponential rate of gradient flow from any non-opposite start",
        trials: 50,
        defaults: with_gaussian_relu!("dim" => "5", "t_max" => "30", "eps" => "pi/4", "flow_tol" => "1e-8"),
        runner: experiments::thm63_flow_rate,
    },
    Entry {
        name: "sec32_variance",
        summary: "gradient variance across targets shrinks for a periodic activation",
        trials: 1,
        defaults: &[
            ("act", "periodic:2"),
            ("control", "relu"),
            ("dims", "5,10,20"),
            ("targets", "200"),
            ("samples", "100000"),
        ],
        runner: experiments::sec32_variance,
    },
    Entry {
        name: "fig1",
        summary: "GD paths in two dimensions with a non-monotone angle",
        trials: 3,
        defaults: &[
            ("dist", "gaussian:mean=(0,1),var=1"),
            ("act", "relu@0"),
            ("target", "1,0"),
            ("inits", "-1,1;-1,0.5;-1,0"),
            ("eta", "1e-3"),
            ("horizon", "30000"),
            ("samples", "100000"),
            ("stride", "10"),
            ("target_dist", "0.01"),
            ("min_rise", "0.05"),
            ("cover_lo", "0.3"),
            ("cover_hi", "2.8"),
            ("cover_gap", "0.2"),
            ("grid", "200"),
            ("grid_range", "1.5"),
            ("grid_samples", "10000"),
        ],
        runner: experiments::fig1,
    },
];

pub fn lookup(name: &str) -> Option<&'static Entry> {
    REGISTRY.iter().find(|e| e.name == name)
}

pub fn names() -> Vec<&'static str> {
    REGISTRY.iter().map(|e| e.name).collect()
}
