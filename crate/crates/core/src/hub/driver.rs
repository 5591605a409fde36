//! Deterministic session schedules. The fast and realtime simulation modes
//! feed the hub the same schedule; realtime only sleeps between actions.

use super::{Command, CommandError, Hub, HubEvent, SessionSnapshot};
use crate::sim::Delivery;
use crate::wire::PeripheralPacket;

#[derive(Debug, Clone, PartialEq)]
pub enum DriverAction {
    Command(Command),
    Deliver(PeripheralPacket),
    Tick,
}

impl DriverAction {
    fn order(&self) -> u8 {
        match self {
            DriverAction::Command(_) => 0,
            DriverAction::Deliver(_) => 1,
            DriverAction::Tick => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledAction {
    pub at_ms: u64,
    pub action: DriverAction,
}

/// Interleaves deliveries, commands and clock ticks up to `end_ms` inclusive.
/// At equal times commands come first, then deliveries, then the tick.
pub fn build_schedule(
    deliveries: &[Delivery],
    commands: &[(u64, Command)],
    end_ms: u64,
    tick_ms: u64,
) -> Vec<ScheduledAction> {
    let tick_ms = tick_ms.max(1);
    let mut out: Vec<ScheduledAction> = Vec::with_capacity(deliveries.len() + (end_ms / tick_ms) as usize + 1);
    out.extend(commands.iter().map(|(t, c)| ScheduledAction { at_ms: *t, action: DriverAction::Command(c.clone()) }));
    out.extend(
        deliveries.iter().map(|d| ScheduledAction { at_ms: d.arrival_ms, action: DriverAction::Deliver(d.packet.clone()) }),
    );
    out.extend((0..=end_ms / tick_ms).map(|k| ScheduledAction { at_ms: k * tick_ms, action: DriverAction::Tick }));
    out.sort_by_key(|a| (a.at_ms, a.action.order()));
    out
}

/// Applies one action; command outcomes are appended to `acks`.
pub fn apply_action(
    hub: &mut Hub,
    action: &ScheduledAction,
    acks: &mut Vec<Result<SessionSnapshot, CommandError>>,
) -> Vec<HubEvent> {
    match &action.action {
        DriverAction::Command(c) => {
            acks.push(hub.command(c.clone(), action.at_ms));
            Vec::new()
        }
        DriverAction::Deliver(p) => hub.receive(p.clone(), action.at_ms),
        DriverAction::Tick => hub.advance(action.at_ms),
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub events: Vec<HubEvent>,
    pub acks: Vec<Result<SessionSnapshot, CommandError>>,
}

/// Runs a whole session on the virtual clock.
pub fn run_schedule(hub: &mut Hub, schedule: &[ScheduledAction]) -> RunOutcome {
    let mut out = RunOutcome { events: hub.start(), acks: Vec::new() };
    for a in schedule {
        let evs = apply_action(hub, a, &mut out.acks);
        out.events.extend(evs);
    }
    out.events.extend(hub.finish());
    out
}
