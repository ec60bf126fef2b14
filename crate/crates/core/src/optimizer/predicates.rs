//! Closed-form scores and bounds shared by the solver, the oracle and the
//! hard-constraint checker.

use crate::compiler::SoftTerm;
use crate::geometry::Rect;
use crate::scene::{AlignmentRelation, DistanceRelation, PositionRelation};

use super::SolverParams;

/// 1 at zero gap, falling linearly to 0 at `d_near`.
pub fn near_score(gap: f64, d_near: f64) -> f64 {
    (1.0 - gap / d_near).max(0.0)
}

/// 0 at zero gap, rising linearly to 1 at `d_far`.
pub fn far_score(gap: f64, d_far: f64) -> f64 {
    (gap / d_far).min(1.0)
}

/// 1 when the compared coordinates coincide, 0 once they are `t` apart.
pub fn alignment_score(delta: f64, t: f64) -> f64 {
    (1.0 - delta.abs() / t).max(0.0)
}

/// Edge or center coordinate compared by an alignment relation. Vertical
/// alignments compare x (left edge, center, right edge); horizontal ones
/// compare y (front edge at −y, center, back edge).
pub fn alignment_coordinate(r: &Rect, relation: AlignmentRelation) -> f64 {
    match relation {
        AlignmentRelation::VerticalLeft => r.min_x,
        AlignmentRelation::VerticalMid => (r.min_x + r.max_x) / 2.0,
        AlignmentRelation::VerticalRight => r.max_x,
        AlignmentRelation::HorizontalFront => r.min_y,
        AlignmentRelation::HorizontalMid => (r.min_y + r.max_y) / 2.0,
        AlignmentRelation::HorizontalBack => r.max_y,
    }
}

pub fn soft_term_score(term: SoftTerm, subject: &Rect, reference: &Rect, params: &SolverParams) -> f64 {
    match term {
        SoftTerm::Distance(DistanceRelation::Near) => near_score(subject.gap(reference), params.d_near_cm),
        SoftTerm::Distance(DistanceRelation::Far) => far_score(subject.gap(reference), params.d_far_cm),
        SoftTerm::Alignment(rel) => {
            alignment_score(alignment_coordinate(subject, rel) - alignment_coordinate(reference, rel), params.t_align_cm)
        }
    }
}

/// How far a directional relation is from holding, in cm (≤ 0 when it
/// holds). `left_of` requires the subject's right edge at or left of the
/// reference's left edge; `in_front_of` requires the subject's back edge at
/// or in front of the reference's front edge. For `on_top_of` the result is
/// the subject's footprint area outside the base, in cm².
pub fn relation_excess(relation: PositionRelation, subject: &Rect, reference: &Rect) -> f64 {
    match relation {
        PositionRelation::LeftOf => subject.max_x - reference.min_x,
        PositionRelation::RightOf => reference.max_x - subject.min_x,
        PositionRelation::InFrontOf => subject.max_y - reference.min_y,
        PositionRelation::Behind => reference.max_y - subject.min_y,
        PositionRelation::OnTopOf => {
            let outside = subject.area_outside(reference);
            if outside > 0.0 {
                outside
            } else {
                // Degenerate overhang (zero area but outside the base edge).
                let over = (reference.min_x - subject.min_x)
                    .max(subject.max_x - reference.max_x)
                    .max(reference.min_y - subject.min_y)
                    .max(subject.max_y - reference.max_y);
                if over > 0.0 {
                    over
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Warm-start anchor: 1 at the previous position, 0 from `radius` away.
pub fn anchor_score(displacement: f64, radius: f64) -> f64 {
    (1.0 - displacement / radius).max(0.0)
}
