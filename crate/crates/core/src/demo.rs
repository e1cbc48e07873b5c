//! Offline backend that synthesizes well-formed replies, for trying the
//! pipeline without a model endpoint.

use std::sync::OnceLock;

use pathwise_problems::frameworks::{signature_for, HeuristicSignature, OutputShape};
use pathwise_problems::{Framework, Problem};
use pathwise_sandbox::classic_program;
use regex::Regex;

use crate::llm::{synthetic_tokens, Backend, ChatRequest, ChatResult, LlmError, Role};

/// Replies built from the pair's classic heuristic. Knowledge heuristics
/// are reshaped by an element-wise power drawn per call; scoring
/// heuristics are returned unchanged.
pub struct DemoBackend {
    signature: &'static HeuristicSignature,
    base: String,
    seed: u64,
}

fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn id_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^ID: (\S+)$").expect("valid regex"))
}

impl DemoBackend {
    pub fn new(framework: Framework, problem: Problem, seed: u64) -> Result<Self, LlmError> {
        let signature = signature_for(framework, problem).map_err(|e| LlmError::Config(e.to_string()))?;
        let program = classic_program(framework, problem)
            .ok_or_else(|| LlmError::Config(format!("no classic heuristic for {framework}/{problem}")))?;
        Ok(Self { signature, base: program.source, seed })
    }

    fn draw(&self, request: &ChatRequest) -> u64 {
        mix(self.seed ^ mix(request.role as u64) ^ mix(request.index as u64).rotate_left(17))
    }

    fn program(&self, draw: u64) -> (String, String) {
        let name = self.signature.function_name;
        let params = self.signature.params.join(", ");
        let power = 0.5 + (draw % 11) as f64 * 0.25;
        let base = self.base.replacen(&format!("fn {name}("), &format!("fn base_{name}("), 1);
        let body = match self.signature.output {
            OutputShape::CandidateScores => return (self.base.clone(), "Classic greedy score.".to_string()),
            OutputShape::ItemVector => format!(
                "fn {name}({params}) {{\n    let out = [];\n    for x in base_{name}({params}) {{\n        out.push(x ** {power:.2});\n    }}\n    out\n}}\n"
            ),
            OutputShape::SquareMatrix => format!(
                "fn {name}({params}) {{\n    let out = [];\n    for row in base_{name}({params}) {{\n        let r = [];\n        for x in row {{\n            r.push(x ** {power:.2});\n        }}\n        out.push(r);\n    }}\n    out\n}}\n"
            ),
        };
        (format!("{base}\n{body}"), format!("Classic desirability raised to the power {power:.2}."))
    }
}

impl Backend for DemoBackend {
    fn id(&self) -> &str {
        "mock-demo"
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResult, LlmError> {
        let draw = self.draw(request);
        let text = match request.role {
            Role::Init | Role::WorldModel => {
                let (source, description) = self.program(draw);
                let mut text = format!("Description: {description}\n\n```rhai\n{}```\n", source);
                if request.role == Role::Init {
                    text.push_str("\nDerivation Rationale: Rescaling the classic signal changes how sharply the search focuses.\n");
                }
                text
            }
            Role::Policy => {
                let ids: Vec<&str> =
                    id_re().captures_iter(&request.user).map(|c| c.get(1).expect("group").as_str()).collect();
                if ids.is_empty() {
                    return Err(LlmError::Response("policy prompt lists no candidates".into()));
                }
                let first = ids[(draw % ids.len() as u64) as usize];
                let second = ids[((draw >> 16) % ids.len() as u64) as usize];
                let parents =
                    if draw & 1 == 1 && first != second { format!("{first}, {second}") } else { first.to_string() };
                format!("PARENTS: [{parents}]\nDIRECTIVE: Adjust the exponent applied to the desirability signal.")
            }
            Role::PolicyCritic => {
                "Prefer parents with the lowest objective values and vary the exponent in small steps.".to_string()
            }
            Role::WmCritic => "Moderate exponents keep exploration while still favoring strong edges.".to_string(),
        };
        Ok(ChatResult {
            input_tokens: synthetic_tokens(&request.system) + synthetic_tokens(&request.user),
            output_tokens: synthetic_tokens(&text),
            text,
            latency: std::time::Duration::ZERO,
            backend: self.id().to_string(),
        })
    }
}
