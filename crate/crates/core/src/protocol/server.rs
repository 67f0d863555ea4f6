//! Socket Trent: serves Initialization and Binding over TCP.
//!
//! Each connection is handled on its own thread. A client opens a session
//! with `InitRequest { session_id: 0 }` or joins one by id and receives its
//! `InitGrant`. For Binding a client sends an optional `BindRequest` and then
//! its `BindClaim`; Trent answers both clients with the same `VerdictNotice`
//! once both claims are in. Alpha is drawn from a stream keyed by the
//! session id, so verdicts do not depend on thread scheduling.

use std::collections::HashMap;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use super::binding::{binding_verdict, session_alpha, BindingClaim, Verdict};
use super::session::{Deadline, SessionRecord, Trent};
use super::transport::{StreamTransport, Transport, TransportError};
use super::wire::WireMessage;
use super::{Party, ProtocolError};
use crate::analysis::AlphaDistribution;
use crate::rng::stream_rng;

/// Stream index used for session preparation; alpha uses `session_id + 1`.
const PREPARE_STREAM: u64 = 0;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub seed: u64,
    pub alpha_dist: AlphaDistribution,
    pub eta: f64,
    pub deadline: Deadline,
    /// How long a claim waits for the other party's claim.
    pub bind_wait: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            seed: 0,
            alpha_dist: AlphaDistribution::default(),
            eta: 0.0,
            deadline: Deadline::default(),
            bind_wait: Duration::from_secs(30),
        }
    }
}

struct Entry {
    record: SessionRecord,
    claims: [Option<BindingClaim>; 2],
    verdict: Option<Verdict>,
}

struct State {
    trent: Trent,
    rng: crate::rng::StreamRng,
    sessions: HashMap<u64, Entry>,
}

struct Shared {
    config: ServerConfig,
    state: Mutex<State>,
    ready: Condvar,
}

pub struct TrentServer {
    listener: TcpListener,
    shared: Arc<Shared>,
}

impl TrentServer {
    pub fn bind<A: ToSocketAddrs>(addr: A, config: ServerConfig) -> std::io::Result<TrentServer> {
        let listener = TcpListener::bind(addr)?;
        let rng = stream_rng(config.seed, PREPARE_STREAM);
        Ok(TrentServer {
            listener,
            shared: Arc::new(Shared {
                config,
                state: Mutex::new(State {
                    trent: Trent::new(),
                    rng,
                    sessions: HashMap::new(),
                }),
                ready: Condvar::new(),
            }),
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until `max_connections` have been served (forever
    /// when `None`), then waits for their handlers to finish.
    pub fn serve(self, max_connections: Option<usize>) -> std::io::Result<()> {
        let mut handles = Vec::new();
        for (i, stream) in self.listener.incoming().enumerate() {
            let stream = stream?;
            let shared = Arc::clone(&self.shared);
            handles.push(thread::spawn(move || handle(shared, stream)));
            if max_connections.is_some_and(|k| i + 1 >= k) {
                break;
            }
        }
        for h in handles {
            let _ = h.join();
        }
        Ok(())
    }

    /// Session records created so far, by id.
    pub fn sessions(&self) -> Vec<SessionRecord> {
        let st = self.shared.state.lock().expect("server state poisoned");
        let mut v: Vec<_> = st.sessions.values().map(|e| e.record.clone()).collect();
        v.sort_by_key(|r| r.session_id);
        v
    }
}

fn grant(record: &SessionRecord, party: Party) -> WireMessage {
    WireMessage::InitGrant {
        session_id: record.session_id,
        party,
        qubits: record.qubits(party).to_vec(),
        cross_bits: record.cross_bits(party).to_vec(),
        deadline: record.deadline,
    }
}

fn handle(shared: Arc<Shared>, stream: TcpStream) {
    let mut t = StreamTransport::new(stream);
    loop {
        let msg = match t.recv(None) {
            Ok(m) => m,
            Err(_) => return,
        };
        let reply = match respond(&shared, msg) {
            Ok(Some(r)) => r,
            Ok(None) => continue,
            Err(_) => return,
        };
        if t.send(&reply).is_err() {
            return;
        }
    }
}

fn respond(shared: &Shared, msg: WireMessage) -> Result<Option<WireMessage>, ProtocolError> {
    match msg {
        WireMessage::InitRequest {
            session_id: 0,
            party,
            n,
            ..
        } => {
            let mut st = shared.state.lock().expect("server state poisoned");
            let State {
                trent,
                rng,
                sessions,
            } = &mut *st;
            let mut record = trent.init_session(n as usize, rng)?;
            record.deadline = shared.config.deadline;
            let reply = grant(&record, party);
            sessions.insert(
                record.session_id,
                Entry {
                    record,
                    claims: [None, None],
                    verdict: None,
                },
            );
            Ok(Some(reply))
        }
        WireMessage::InitRequest {
            session_id, party, ..
        } => {
            let st = shared.state.lock().expect("server state poisoned");
            let e = st
                .sessions
                .get(&session_id)
                .ok_or(ProtocolError::UnknownSession(session_id))?;
            Ok(Some(grant(&e.record, party)))
        }
        WireMessage::BindRequest { session_id, .. } => {
            let st = shared.state.lock().expect("server state poisoned");
            st.sessions
                .get(&session_id)
                .ok_or(ProtocolError::UnknownSession(session_id))?;
            Ok(None)
        }
        WireMessage::BindClaim { session_id, claim } => {
            let cfg = &shared.config;
            let mut st = shared.state.lock().expect("server state poisoned");
            {
                let e = st
                    .sessions
                    .get_mut(&session_id)
                    .ok_or(ProtocolError::UnknownSession(session_id))?;
                let slot = claim.party.code() as usize;
                e.claims[slot] = Some(claim);
                if let (Some(a), Some(b), None) = (&e.claims[0], &e.claims[1], e.verdict) {
                    let alpha = session_alpha(&cfg.alpha_dist, cfg.seed, session_id);
                    e.verdict = Some(binding_verdict(&e.record, a, b, alpha, cfg.eta)?);
                    shared.ready.notify_all();
                }
            }
            let (st, _) = shared
                .ready
                .wait_timeout_while(st, cfg.bind_wait, |st| {
                    st.sessions
                        .get(&session_id)
                        .is_some_and(|e| e.verdict.is_none())
                })
                .expect("server state poisoned");
            match st.sessions.get(&session_id).and_then(|e| e.verdict) {
                Some(verdict) => Ok(Some(WireMessage::VerdictNotice {
                    session_id,
                    verdict,
                })),
                None => Err(ProtocolError::Transport(TransportError::Timeout)),
            }
        }
        other => Err(ProtocolError::UnexpectedMessage(other.kind().to_string())),
    }
}

/// Client-side helper: request a grant from a socket Trent.
pub fn request_grant(
    transport: &mut impl Transport,
    session_id: u64,
    party: Party,
    n: u32,
) -> Result<WireMessage, ProtocolError> {
    transport.send(&WireMessage::InitRequest {
        session_id,
        party,
        n,
        contract: Vec::new(),
    })?;
    match transport.recv(Some(Duration::from_secs(30)))? {
        g @ WireMessage::InitGrant { .. } => Ok(g),
        other => Err(ProtocolError::UnexpectedMessage(other.kind().to_string())),
    }
}

/// Client-side helper: submit a claim and wait for the verdict.
pub fn submit_claim(
    transport: &mut impl Transport,
    session_id: u64,
    claim: BindingClaim,
) -> Result<Verdict, ProtocolError> {
    let party = claim.party;
    transport.send(&WireMessage::BindRequest { session_id, party })?;
    transport.send(&WireMessage::BindClaim { session_id, claim })?;
    match transport.recv(Some(Duration::from_secs(60)))? {
        WireMessage::VerdictNotice { verdict, .. } => Ok(verdict),
        other => Err(ProtocolError::UnexpectedMessage(other.kind().to_string())),
    }
}
