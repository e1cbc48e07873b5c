use pathwise_problems::{Framework, Problem};

use crate::program::HeuristicProgram;

const SOURCES: [(Framework, Problem, &str); 9] = [
    (Framework::Constructive, Problem::Tsp, include_str!("../heuristics/constructive_tsp_nearest.rhai")),
    (Framework::Constructive, Problem::Kp, include_str!("../heuristics/constructive_kp_density.rhai")),
    (Framework::Constructive, Problem::BppOnline, include_str!("../heuristics/constructive_bpp_online_best_fit.rhai")),
    (Framework::Aco, Problem::Tsp, include_str!("../heuristics/aco_tsp_inverse_distance.rhai")),
    (Framework::Aco, Problem::Cvrp, include_str!("../heuristics/aco_cvrp_inverse_distance.rhai")),
    (Framework::Aco, Problem::Mkp, include_str!("../heuristics/aco_mkp_value_per_weight.rhai")),
    (Framework::Aco, Problem::Op, include_str!("../heuristics/aco_op_prize_per_distance.rhai")),
    (Framework::Aco, Problem::BppOffline, include_str!("../heuristics/aco_bpp_offline_size.rhai")),
    (Framework::Gls, Problem::Tsp, include_str!("../heuristics/gls_tsp_distance.rhai")),
];

/// The shipped classical heuristic for a pair, written in the script dialect
/// (nearest neighbour, value density, best fit, inverse distance, ...).
pub fn classic_program(framework: Framework, problem: Problem) -> Option<HeuristicProgram> {
    SOURCES.iter().find(|(f, p, _)| (*f, *p) == (framework, problem)).map(|(f, p, text)| {
        HeuristicProgram::from_file_text(text, Some((*f, *p))).expect("shipped heuristics carry valid headers")
    })
}
