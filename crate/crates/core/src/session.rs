//! The clinical workflow as an explicit state machine.
//!
//! ```text
//! Landmarking(current) --Register--> Registered --Confirm--> EntryPointPhase --Next--> CatheterTracking
//!        ^                               |                                                 |
//!        +-------------Back--------------+                     EntryPointPhase <--Back-----+
//! ```
//!
//! [`dispatch`] is pure: it either returns the next state with an effect
//! report or rejects the event and leaves the caller's state untouched.
//! Reset is accepted from every phase.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::VirtualScene;
use nalgebra::UnitQuaternion;

use crate::geometry::{Point3, Ray, Rotation, Vec3};
use crate::guidance::{
    catheter_tip, compute_tre, place_entry_point, tip_feedback_registered, CatheterModel, CatheterOverlay, EntryPoint,
    MarkerPose, TipFeedback, TrajectoryPlan,
};
use crate::registration::{
    aggregate_repeated_picks, estimate_similarity, LandmarkId, LandmarkSet, RegistrationResult, ScaleMode, Space,
};

/// Everything a session needs from its scenario. Shared, read-only.
#[derive(Debug, Clone)]
pub struct SessionContext {
    pub scene: Arc<VirtualScene>,
    pub catheter: CatheterModel,
    /// Entry point planned on the pre-operative model; enables TRE readouts.
    pub planned_entry_model: Option<Point3>,
    /// Catheter target in model space (e.g. the ipsilateral frontal horn).
    pub target_model: Point3,
    pub scale_mode: ScaleMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Phase {
    Landmarking {
        current: LandmarkId,
    },
    /// Registration preview: the fit is shown and can still be redone.
    Registered,
    EntryPointPhase,
    CatheterTracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: Phase,
    /// Accumulated picks per landmark. Lists are never empty.
    pub picks: BTreeMap<LandmarkId, Vec<Point3>>,
    pub registration: Option<RegistrationResult>,
    pub entry: Option<EntryPoint>,
    pub tre_mm: Option<f64>,
    pub last_tip_feedback: Option<TipFeedback>,
}

impl SessionState {
    pub fn new() -> Self {
        Self {
            phase: Phase::Landmarking { current: LandmarkId::first() },
            picks: BTreeMap::new(),
            registration: None,
            entry: None,
            tre_mm: None,
            last_tip_feedback: None,
        }
    }

    pub fn current_landmark(&self) -> Option<LandmarkId> {
        match self.phase {
            Phase::Landmarking { current } => Some(current),
            _ => None,
        }
    }

    pub fn all_picked(&self) -> bool {
        LandmarkId::ALL.iter().all(|id| self.picks.get(id).is_some_and(|v| !v.is_empty()))
    }

    /// Text for the banner at the top of the screen.
    pub fn prompt(&self) -> String {
        match self.phase {
            Phase::Landmarking { current } => current.label().to_string(),
            Phase::Registered => match &self.registration {
                Some(r) => format!("RMSE {:.2} mm", r.rmse),
                None => "Registered".into(),
            },
            Phase::EntryPointPhase => "Place entry point".into(),
            Phase::CatheterTracking => match self.tre_mm {
                Some(t) => format!("TRE {t:.2} mm"),
                None => "Catheter tracking".into(),
            },
        }
    }

    /// Checks every structural invariant; returns the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.picks.values().any(|v| v.is_empty()) {
            return Err("empty pick list stored".into());
        }
        let landmarking = matches!(self.phase, Phase::Landmarking { .. });
        if !landmarking && !self.all_picked() {
            return Err(format!("{:?} without all seven landmarks", self.phase));
        }
        if landmarking && (self.registration.is_some() || self.entry.is_some()) {
            return Err("landmarking phase carries a registration or entry".into());
        }
        if !landmarking && self.registration.is_none() {
            return Err(format!("{:?} without registration", self.phase));
        }
        if self.phase == Phase::CatheterTracking && self.entry.is_none() {
            return Err("catheter tracking without entry point".into());
        }
        if self.entry.is_some() && !matches!(self.phase, Phase::EntryPointPhase | Phase::CatheterTracking) {
            return Err("entry point outside the entry/catheter phases".into());
        }
        if self.last_tip_feedback.is_some() && self.phase != Phase::CatheterTracking {
            return Err("tip feedback outside catheter tracking".into());
        }
        if let Some(r) = &self.registration {
            if !(r.rmse >= 0.0) {
                return Err("negative or NaN RMSE".into());
            }
        }
        Ok(())
    }
}

impl Default for SessionState {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    Acquire { point: Point3 },
    Delete,
    Next,
    Back,
    Register,
    Confirm,
    PlaceEntry { ray: Ray },
    DeleteEntry,
    MarkerUpdate { pose: MarkerPose },
    Reset,
}

impl SessionEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionEvent::Acquire { .. } => "acquire",
            SessionEvent::Delete => "delete",
            SessionEvent::Next => "next",
            SessionEvent::Back => "back",
            SessionEvent::Register => "register",
            SessionEvent::Confirm => "confirm",
            SessionEvent::PlaceEntry { .. } => "place_entry",
            SessionEvent::DeleteEntry => "delete_entry",
            SessionEvent::MarkerUpdate { .. } => "marker_update",
            SessionEvent::Reset => "reset",
        }
    }
}

/// What an accepted event changed, for display.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub prompt: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acquired: Option<Point3>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pick_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tre_mm: Option<f64>,
    /// Distance between the placed entry point and the registered plan (mm).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entry_to_plan_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlay: Option<CatheterOverlay>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tip_feedback: Option<TipFeedback>,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{event} rejected in {phase:?}: {reason}")]
pub struct RejectedEvent {
    pub event: String,
    pub phase: Phase,
    pub reason: String,
}

pub fn new_session() -> SessionState {
    SessionState::new()
}

/// Applies one event. On rejection the input state is the current state.
pub fn dispatch(
    ctx: &SessionContext,
    state: &SessionState,
    event: &SessionEvent,
) -> Result<(SessionState, EffectReport), RejectedEvent> {
    let reject = |reason: &str| RejectedEvent { event: event.kind().into(), phase: state.phase, reason: reason.into() };
    let mut next = state.clone();
    let mut report = EffectReport::default();

    match (state.phase, event) {
        (_, SessionEvent::Reset) => next = SessionState::new(),

        (Phase::Landmarking { current }, SessionEvent::Acquire { point }) => {
            if !point.coords.iter().all(|v| v.is_finite()) {
                return Err(reject("point has non-finite coordinates"));
            }
            let picks = next.picks.entry(current).or_default();
            picks.push(*point);
            report.acquired = Some(*point);
            report.pick_count = Some(picks.len());
        }
        (Phase::Landmarking { current }, SessionEvent::Delete) => {
            if next.picks.remove(&current).is_none() {
                return Err(reject("no picks to delete for this landmark"));
            }
            report.pick_count = Some(0);
        }
        (Phase::Landmarking { current }, SessionEvent::Next) => {
            next.phase = Phase::Landmarking { current: current.next() };
        }
        (Phase::Landmarking { current }, SessionEvent::Back) => {
            next.phase = Phase::Landmarking { current: current.prev() };
        }
        (Phase::Landmarking { .. }, SessionEvent::Register) => {
            if !state.all_picked() {
                return Err(reject("all seven landmarks must be placed before registering"));
            }
            let world = LandmarkSet::from_points(
                Space::World,
                state.picks.iter().map(|(id, p)| (*id, aggregate_repeated_picks(p).expect("non-empty").centroid)),
            );
            let reg = estimate_similarity(ctx.scene.model_landmarks(), &world, ctx.scale_mode)
                .map_err(|e| reject(&e.to_string()))?;
            report.rmse = Some(reg.rmse);
            report.scale = Some(reg.transform.scale);
            next.registration = Some(reg);
            next.phase = Phase::Registered;
        }

        (Phase::Registered, SessionEvent::Confirm) => next.phase = Phase::EntryPointPhase,
        (Phase::Registered, SessionEvent::Back) => {
            next = re_register(state)?;
        }

        (Phase::EntryPointPhase, SessionEvent::PlaceEntry { ray }) => {
            if state.entry.is_some() {
                return Err(reject("an entry point is already placed; delete it first"));
            }
            let mut entry = place_entry_point(ray, ctx.scene.head_mesh()).map_err(|e| reject(&e.to_string()))?;
            entry.planned_model = ctx.planned_entry_model;
            let reg = state.registration.as_ref();
            if let Some(planned) = ctx.planned_entry_model {
                let truth = ctx.scene.model_to_world_truth().apply(&planned);
                let tre = compute_tre(reg, &planned, &truth).map_err(|e| reject(&e.to_string()))?;
                let registered = reg.expect("registered in this phase").transform.apply(&planned);
                report.tre_mm = Some(tre);
                report.entry_to_plan_mm = Some((entry.world - registered).norm());
                next.tre_mm = Some(tre);
            }
            report.acquired = Some(entry.world);
            next.entry = Some(entry);
        }
        (Phase::EntryPointPhase, SessionEvent::DeleteEntry) => {
            if next.entry.take().is_none() {
                return Err(reject("no entry point to delete"));
            }
            next.tre_mm = None;
        }
        (Phase::EntryPointPhase, SessionEvent::Next) => {
            if state.entry.is_none() {
                return Err(reject("place an entry point first"));
            }
            report.tre_mm = state.tre_mm;
            next.phase = Phase::CatheterTracking;
        }

        (Phase::CatheterTracking, SessionEvent::MarkerUpdate { pose }) => {
            let reg = state.registration.as_ref().expect("registered in this phase");
            let entry = state.entry.expect("entry present in this phase");
            let plan =
                TrajectoryPlan::new(entry, ctx.target_model, &reg.transform).map_err(|e| reject(&e.to_string()))?;
            let overlay = catheter_tip(pose, &ctx.catheter);
            if !overlay.tip.coords.iter().all(|v| v.is_finite()) {
                return Err(reject("marker pose is not finite"));
            }
            let fb = tip_feedback_registered(&overlay.tip, ctx.scene.ventricle_mesh(), &reg.transform, &plan);
            report.overlay = Some(overlay);
            report.tip_feedback = Some(fb);
            report.tre_mm = state.tre_mm;
            next.last_tip_feedback = Some(fb);
        }
        (Phase::CatheterTracking, SessionEvent::Back) => {
            next.phase = Phase::EntryPointPhase;
            next.last_tip_feedback = None;
        }

        (Phase::Landmarking { .. }, _) => return Err(reject("not available while placing landmarks")),
        (Phase::Registered, _) => return Err(reject("confirm the registration or go back to re-select landmarks")),
        (Phase::EntryPointPhase, _) => return Err(reject("not available while placing the entry point")),
        (Phase::CatheterTracking, _) => return Err(reject("not available during catheter tracking")),
    }

    report.prompt = next.prompt();
    Ok((next, report))
}

/// Leaves the registration preview to re-select landmarks. Picks are kept;
/// the cursor goes to the first landmark without picks, or the first landmark.
pub fn re_register(state: &SessionState) -> Result<SessionState, RejectedEvent> {
    if state.phase != Phase::Registered {
        return Err(RejectedEvent {
            event: "re_register".into(),
            phase: state.phase,
            reason: "only available in the registration preview".into(),
        });
    }
    let current = LandmarkId::ALL.into_iter().find(|id| !state.picks.contains_key(id)).unwrap_or(LandmarkId::first());
    Ok(SessionState {
        phase: Phase::Landmarking { current },
        picks: state.picks.clone(),
        registration: None,
        entry: None,
        tre_mm: None,
        last_tip_feedback: None,
    })
}

/// Event sequence for a complete walkthrough: each landmark acquired from
/// `world_picks` followed by Next, then Register, Confirm, an entry ray aimed
/// at the true location of the planned entry, Next, and one marker update
/// placing the tip `insertion_mm` along the true trajectory.
pub fn walkthrough_script(ctx: &SessionContext, world_picks: &LandmarkSet, insertion_mm: f64) -> Vec<SessionEvent> {
    let mut events = Vec::new();
    for (id, p) in world_picks.iter() {
        debug_assert_eq!(Some(id), LandmarkId::ALL.get(events.len() / 2).copied());
        events.push(SessionEvent::Acquire { point: *p });
        events.push(SessionEvent::Next);
    }
    events.push(SessionEvent::Register);
    events.push(SessionEvent::Confirm);

    let truth = ctx.scene.model_to_world_truth();
    let centre = ctx.scene.head_mesh().vertex_centroid();
    let entry = truth.apply(&ctx.planned_entry_model.unwrap_or(ctx.target_model));
    let outward = (entry - centre).normalize();
    let ray = Ray::new(entry + outward * 100.0, -outward).expect("non-zero direction");
    events.push(SessionEvent::PlaceEntry { ray });
    events.push(SessionEvent::Next);

    let target = truth.apply(&ctx.target_model);
    let dir = (target - entry).normalize();
    let rotation = Rotation::from_quaternion(
        UnitQuaternion::rotation_between(&ctx.catheter.offset().normalize(), &dir)
            .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI)),
    );
    let tip = entry + dir * insertion_mm;
    let origin = tip - rotation.rotate(ctx.catheter.offset());
    events.push(SessionEvent::MarkerUpdate { pose: MarkerPose::new(rotation, origin.coords) });
    events
}

/// One line of the audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub seq: u64,
    pub event: SessionEvent,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// A session bound to its context, with an append-only event log.
#[derive(Debug, Clone)]
pub struct Session {
    ctx: Arc<SessionContext>,
    state: SessionState,
    log: Vec<LoggedEvent>,
}

impl Session {
    pub fn new(ctx: Arc<SessionContext>) -> Self {
        Self { ctx, state: SessionState::new(), log: Vec::new() }
    }

    pub fn context(&self) -> &SessionContext {
        &self.ctx
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn log(&self) -> &[LoggedEvent] {
        &self.log
    }

    pub fn apply(&mut self, event: SessionEvent) -> Result<EffectReport, RejectedEvent> {
        let seq = self.log.len() as u64;
        match dispatch(&self.ctx, &self.state, &event) {
            Ok((state, report)) => {
                self.state = state;
                self.log.push(LoggedEvent { seq, event, accepted: true, reason: None });
                Ok(report)
            }
            Err(rej) => {
                self.log.push(LoggedEvent { seq, event, accepted: false, reason: Some(rej.reason.clone()) });
                Err(rej)
            }
        }
    }

    /// Rebuilds a session by re-applying every logged event in order.
    pub fn replay<'a>(ctx: Arc<SessionContext>, events: impl IntoIterator<Item = &'a SessionEvent>) -> Self {
        let mut s = Self::new(ctx);
        for e in events {
            let _ = s.apply(e.clone());
        }
        s
    }

    /// Event log as JSON lines.
    pub fn log_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.log {
            out.push_str(&serde_json::to_string(e).expect("log entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn parse_log_jsonl(text: &str) -> Result<Vec<LoggedEvent>, serde_json::Error> {
        text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
    }
}
