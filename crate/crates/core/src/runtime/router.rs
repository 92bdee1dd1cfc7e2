//! Hands inbound messages to the sessions waiting for them.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};

use super::fault_names::CHANNEL_CLOSED;
use crate::comm::Message;
use crate::value::ValueTree;

/// Sends the reply of a request-response exchange.
pub(crate) type ReplyFn = Box<dyn FnOnce(Message) + Send>;

pub(crate) struct Inbound {
    pub msg: Message,
    pub reply: Option<ReplyFn>,
}

impl Inbound {
    pub fn respond(self, msg: Message) {
        if let Some(r) = self.reply {
            r(msg);
        }
    }
}

#[derive(Default)]
struct Slot {
    /// `Some(None)` means the router closed while waiting.
    value: Mutex<Option<Option<Inbound>>>,
    ready: Condvar,
}

impl Slot {
    fn fill(&self, v: Option<Inbound>) {
        *self.value.lock().unwrap() = Some(v);
        self.ready.notify_one();
    }
}

struct Waiter {
    ops: Vec<String>,
    slot: Arc<Slot>,
}

#[derive(Default)]
struct State {
    closed: bool,
    waiters: Vec<Waiter>,
    /// Messages nobody was waiting for yet, in arrival order.
    unclaimed: VecDeque<Inbound>,
}

#[derive(Default)]
pub(crate) struct Router {
    state: Mutex<State>,
}

impl Router {
    /// Delivers to the oldest session waiting for the operation. Otherwise a
    /// message that may open a session is returned to the caller, and any
    /// other message is kept until someone waits for it.
    pub fn route(&self, inbound: Inbound, opens_session: bool) -> Option<Inbound> {
        let mut st = self.state.lock().unwrap();
        if st.closed {
            drop(st);
            reject(inbound);
            return None;
        }
        let op = inbound.msg.operation.as_str();
        if let Some(i) = st.waiters.iter().position(|w| w.ops.iter().any(|o| o == op)) {
            let w = st.waiters.remove(i);
            w.slot.fill(Some(inbound));
            return None;
        }
        if opens_session {
            return Some(inbound);
        }
        st.unclaimed.push_back(inbound);
        None
    }

    /// Blocks until a message for one of `ops` arrives; `None` once closed.
    pub fn wait(&self, ops: &[&str]) -> Option<Inbound> {
        let slot = {
            let mut st = self.state.lock().unwrap();
            if st.closed {
                return None;
            }
            if let Some(i) = st
                .unclaimed
                .iter()
                .position(|m| ops.contains(&m.msg.operation.as_str()))
            {
                return st.unclaimed.remove(i);
            }
            let slot = Arc::new(Slot::default());
            st.waiters.push(Waiter {
                ops: ops.iter().map(|s| s.to_string()).collect(),
                slot: Arc::clone(&slot),
            });
            slot
        };
        let mut v = slot.value.lock().unwrap();
        loop {
            if let Some(got) = v.take() {
                return got;
            }
            v = slot.ready.wait(v).unwrap();
        }
    }

    /// Wakes every waiter with `None` and rejects parked messages.
    pub fn close(&self) {
        let (waiters, parked) = {
            let mut st = self.state.lock().unwrap();
            st.closed = true;
            (std::mem::take(&mut st.waiters), std::mem::take(&mut st.unclaimed))
        };
        for w in waiters {
            w.slot.fill(None);
        }
        parked.into_iter().for_each(reject);
    }
}

fn reject(inbound: Inbound) {
    let op = inbound.msg.operation.clone();
    inbound.respond(Message::fault(
        op,
        CHANNEL_CLOSED,
        ValueTree::leaf("service is shutting down"),
    ));
}
