use serde::Serialize;

use super::phase::{operator_admissible, EventKind, Phase};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FsmNode {
    pub phase: Phase,
    pub terminal: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial_rank: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FsmEdge {
    pub from: Phase,
    pub event: EventKind,
    pub to: Phase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FsmGraph {
    pub nodes: Vec<FsmNode>,
    pub edges: Vec<FsmEdge>,
}

impl FsmGraph {
    pub fn contains(&self, from: Phase, event: EventKind, to: Phase) -> bool {
        self.edges
            .iter()
            .any(|e| e.from == from && e.event == event && e.to == to)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph fsm {\n  rankdir=LR;\n");
        for n in &self.nodes {
            let shape = if n.terminal { "doublecircle" } else { "circle" };
            out.push_str(&format!("  {} [shape={shape}];\n", n.phase.as_str()));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "  {} -> {} [label=\"{}\"];\n",
                e.from.as_str(),
                e.to.as_str(),
                e.event
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// Every transition [`step`](super::step) can take.
pub fn fsm_graph() -> FsmGraph {
    use EventKind::*;
    use Phase::*;
    let mut edges = Vec::new();
    let mut add = |from, event, to| edges.push(FsmEdge { from, event, to });

    add(Idle, StartSession, Introduction);
    add(Introduction, ParticipantRecognized, IcubTurnOpen);
    add(IcubTurnOpen, CubeHandedOver, HumanTurn);
    for e in [StickerDescribed, StorySnippetReady, HumanSpeechFinal, CubeHandedOver] {
        add(HumanTurn, e, HumanTurn);
    }
    add(HumanTurn, FeedbackDelivered, IcubTurnClose);
    for e in [CubeHandedOver, StickerDescribed] {
        add(IcubTurnClose, e, IcubTurnClose);
    }
    add(IcubTurnClose, StorySnippetReady, WrapUp);
    add(WrapUp, RecapDelivered, IcubTurnOpen);
    add(WrapUp, RecapDelivered, Closure);
    for p in [Introduction, IcubTurnOpen, HumanTurn, IcubTurnClose, WrapUp] {
        for e in [Timeout, ModuleFailure] {
            add(p, e, p);
            add(p, e, FailureRecovery);
        }
    }
    add(FailureRecovery, RecoveryComplete, IcubTurnOpen);
    add(FailureRecovery, RecoveryComplete, Closure);
    for p in Phase::ALL.into_iter().filter(|p| operator_admissible(*p)) {
        add(p, Abort, Closure);
        add(p, ForceRetry, p);
    }

    let nodes = Phase::ALL
        .into_iter()
        .map(|phase| FsmNode {
            phase,
            terminal: phase.is_terminal(),
            trial_rank: phase.trial_rank(),
        })
        .collect();
    FsmGraph { nodes, edges }
}
