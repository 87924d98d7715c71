//! Deterministic simulation of the SAC network and the ten-step request
//! protocol.
//!
//! Every party is in-process and every message crosses a [`Bus`] with a
//! logical clock. Randomness is derived from the scenario seed per party, so
//! a run is a pure function of `(config, seed)`.
//!
//! Steps, per scripted request:
//!
//! 1. requestor authenticates at a SAC node and receives its UID and a session token
//! 2. requestor sends the sealed request to that node
//! 3. the node re-seals the request to each peer
//! 4. every node evaluates the request against its own ACL
//! 5. unanimous approval; the round-robin miner mines a `RequestRecord` block
//! 6. an access code is issued
//! 7. the code goes to the requestor (from the origin node) and the updated
//!    request to the storage site (from the miner)
//! 8. requestor authenticates at the storage site
//! 9. requestor presents the updated request
//! 10. the site serves the enciphered frames and the audit record is mined

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use subtle::ConstantTimeEq;
use thiserror::Error;

use crate::contract::{
    generate_access_code, issue_uid, validate_request, AccessRequest, AclEntry, ContractError, Date, DateWindow, Reason, RequestType, Role,
    TimeOfDay, TimeRange, UidRegistry, UpdatedRequest,
};
use crate::dab::{decipher_frame, wire, DabKeyset, FrameBuffer};
use crate::envelope::{generate_keypair, open_from, seal, Envelope, EnvelopeError, KeyDirectory, KeyPair, PublicKey};
use crate::ledger::{genesis_at, mine_block, validate_block, Block, BodyKey, BodyKeyStore, Chain, LedgerError, Transaction, TxKind};
use crate::storage::{AuditRecord, StorageError, StorageSite, VideoRecord};
use crate::synth;
use crate::Digest256;

pub use crate::storage::AuditAction;

pub const TRANSCRIPT_FORMAT: u32 = 1;
pub const BODY_KEY_ID: &str = "sac-body-key-1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("UnknownUser: {0}")]
    UnknownUser(String),
    #[error("CredentialMismatch")]
    CredentialMismatch,
    #[error("session token rejected")]
    InvalidSession,
    #[error("no SAC nodes configured")]
    NoNodes,
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("DivergentAcl: nodes disagree on the request")]
    DivergentAcl,
    #[error("UnknownStorageSite: {0}")]
    UnknownStorageSite(String),
    #[error("InvalidTransaction: {0}")]
    InvalidTransaction(String),
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("replica {0} rejected a block: {1}")]
    ReplicaRejected(String, LedgerError),
    #[error("malformed protocol message")]
    Malformed,
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

/// A failure inside [`run_scenario`], tagged with the protocol step.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {step}: {error}")]
pub struct ScenarioError {
    pub step: u8,
    pub error: Box<NetworkError>,
}

fn at(step: u8) -> impl Fn(NetworkError) -> ScenarioError {
    move |e| ScenarioError { step, error: Box::new(e) }
}

/// Salted hash standing in for a biometric template.
pub fn credential_digest(secret: &[u8]) -> Digest256 {
    Digest256::of_parts(&[b"sepris/credential/v1", secret])
}

/// Network-wide block body key for a scenario seed.
pub fn body_key_for_seed(seed: u64) -> [u8; 32] {
    Digest256::of_parts(&[b"sepris/sim/body-key", &seed.to_le_bytes()]).0
}

fn derive(seed: u64, purpose: &str, label: &str) -> Digest256 {
    Digest256::of_parts(&[b"sepris/sim/v1", &seed.to_le_bytes(), purpose.as_bytes(), &[0], label.as_bytes()])
}

// ---------------------------------------------------------------------------
// Scenario configuration

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserConfig {
    pub label: String,
    pub role: Role,
    /// Registered credential digest (hex).
    pub credential: Digest256,
    pub enroll_at: String,
    #[serde(default)]
    pub device_info: String,
}

/// An ACL entry for an enrolled user, optionally held by only some nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AclConfig {
    pub user: String,
    pub allowed_cameras: Vec<String>,
    pub allowed_date_window: DateWindow,
    pub max_range_minutes: u32,
    pub allowed_types: Vec<RequestType>,
    pub allowed_storage_sites: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<String>>,
}

/// Synthetic footage generated at ingest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoSource {
    pub camera_id: String,
    pub date: Date,
    pub start: TimeOfDay,
    pub fps: u8,
    pub frames: u32,
    pub width: u16,
    pub height: u16,
    pub channels: u8,
    pub seed: u64,
}

impl VideoSource {
    pub fn frame(&self, i: u32) -> FrameBuffer {
        synth::natural_image(usize::from(self.width), usize::from(self.height), usize::from(self.channels), self.seed.wrapping_add(u64::from(i)))
    }

    pub fn record(&self) -> Result<VideoRecord, StorageError> {
        VideoRecord::new(&self.camera_id, self.date, self.start.seconds(), self.fps, (0..self.frames).map(|i| self.frame(i)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageConfig {
    pub name: String,
    pub address: String,
    pub videos: Vec<VideoSource>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRequest {
    /// User label; a label with no enrollment plays an intruder.
    pub user: String,
    pub via: String,
    pub camera_ids: Vec<String>,
    pub date: Date,
    pub range: TimeRange,
    #[serde(rename = "type")]
    pub kind: RequestType,
    pub storage_name: String,
    /// Credential presented instead of the registered one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credential: Option<Digest256>,
    /// Present the updated request a second time after being served.
    #[serde(default)]
    pub replay: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub nodes: Vec<String>,
    pub difficulty_bits: u8,
    #[serde(default)]
    pub clock_base: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub users: Vec<UserConfig>,
    pub acl: Vec<AclConfig>,
    pub storage_sites: Vec<StorageConfig>,
    pub script: Vec<ScriptRequest>,
}

impl ScenarioConfig {
    /// The court walkthrough: five SAC nodes, one storage site, and a court
    /// requesting one minute of one camera through `SAC_2`.
    pub fn court() -> Self {
        let date: Date = "2021-03-14".parse().expect("valid date");
        let t = |s: &str| s.parse::<TimeOfDay>().expect("valid time");
        ScenarioConfig {
            nodes: (1..=5).map(|i| format!("SAC_{i}")).collect(),
            difficulty_bits: 8,
            clock_base: 1_615_716_000,
            seed: Some(2021),
            users: alloc::vec![UserConfig {
                label: "court".into(),
                role: Role::Court,
                credential: credential_digest(b"court fingerprint"),
                enroll_at: "SAC_2".into(),
                device_info: "court workstation".into(),
            }],
            acl: alloc::vec![AclConfig {
                user: "court".into(),
                allowed_cameras: alloc::vec!["cam-07".into(), "cam-08".into()],
                allowed_date_window: DateWindow { from: "2021-01-01".parse().expect("valid date"), to: "2021-12-31".parse().expect("valid date") },
                max_range_minutes: 60,
                allowed_types: alloc::vec![RequestType::WholeContext, RequestType::Activities],
                allowed_storage_sites: alloc::vec!["CloudNVR".into()],
                nodes: None,
            }],
            storage_sites: alloc::vec![StorageConfig {
                name: "CloudNVR".into(),
                address: "cloudnvr.sepris.local:8443".into(),
                videos: alloc::vec![VideoSource {
                    camera_id: "cam-07".into(),
                    date,
                    start: t("10:00"),
                    fps: 2,
                    frames: 150,
                    width: 64,
                    height: 48,
                    channels: 1,
                    seed: 7,
                }],
            }],
            script: alloc::vec![ScriptRequest {
                user: "court".into(),
                via: "SAC_2".into(),
                camera_ids: alloc::vec!["cam-07".into()],
                date,
                range: TimeRange::new(t("10:00"), t("10:01")).expect("valid range"),
                kind: RequestType::WholeContext,
                storage_name: "CloudNVR".into(),
                credential: None,
                replay: false,
            }],
        }
    }
}

// ---------------------------------------------------------------------------
// Bus and transcript

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BusPayload {
    Envelope(Envelope),
    /// Served DAB records; already ciphertext, too large for an envelope.
    CipherStream(Vec<u8>),
}

impl BusPayload {
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            BusPayload::Envelope(e) => e.to_bytes(),
            BusPayload::CipherStream(s) => s.clone(),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            BusPayload::Envelope(_) => "envelope",
            BusPayload::CipherStream(_) => "cipher_stream",
        }
    }
}

/// One message on the bus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolEvent {
    pub request: usize,
    pub step: u8,
    pub sender: String,
    pub receiver: String,
    pub payload: String,
    pub digest: Digest256,
    pub bytes: usize,
    pub logical_time: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Scenario { format: u32, seed: u64, nodes: Vec<String>, difficulty_bits: u8, config_digest: Digest256 },
    Enrolled { user: String, node: String, uid: String },
    Ingested { site: String, segments: usize },
    Message(ProtocolEvent),
    Decision { request: usize, step: u8, node: String, reason: Reason },
    Consensus { request: usize, step: u8, outcome: String },
    Block { request: usize, step: u8, height: usize, hash: Digest256, miner: String, kind: TxKind, attempts_nonce: u32 },
    CodeIssued { request: usize, step: u8, code_digest: Digest256 },
    Grant { request: usize, step: u8, site: String },
    Served { request: usize, step: u8, frames: usize, stream_digest: Digest256, deciphered: bool },
    Denied { request: usize, step: u8, reason: String },
    Done { height: usize, tip: Digest256, replicas_identical: bool },
}

/// Line-delimited JSON events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub events: Vec<Event>,
}

impl Transcript {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(s: &str) -> Result<Self, serde_json::Error> {
        let events = s.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect::<Result<_, _>>()?;
        Ok(Transcript { events })
    }

    pub fn digest(&self) -> Digest256 {
        Digest256::of(self.to_jsonl().as_bytes())
    }

    /// Steps that produced at least one event for request `i`.
    pub fn steps_for(&self, i: usize) -> Vec<u8> {
        let mut steps: Vec<u8> = self
            .events
            .iter()
            .filter_map(|e| match e {
                Event::Decision { request, step, .. }
                | Event::Consensus { request, step, .. }
                | Event::Block { request, step, .. }
                | Event::CodeIssued { request, step, .. }
                | Event::Grant { request, step, .. }
                | Event::Served { request, step, .. }
                | Event::Denied { request, step, .. } => (*request == i).then_some(*step),
                Event::Message(m) => (m.request == i).then_some(m.step),
                _ => None,
            })
            .collect();
        steps.sort_unstable();
        steps.dedup();
        steps
    }
}

/// Reliable, ordered, in-process transport with a logical clock. The tap
/// records every payload's wire bytes when enabled.
#[derive(Debug, Default)]
pub struct Bus {
    time: u64,
    transcript: Transcript,
    tap: Option<Vec<Vec<u8>>>,
    current: usize,
}

impl Bus {
    pub fn with_tap() -> Self {
        Bus { tap: Some(Vec::new()), ..Bus::default() }
    }

    pub fn now(&self) -> u64 {
        self.time
    }

    pub fn log(&mut self, e: Event) {
        self.transcript.events.push(e);
    }

    pub fn send(&mut self, step: u8, from: &str, to: &str, payload: BusPayload) -> BusPayload {
        self.time += 1;
        let bytes = payload.to_bytes();
        self.transcript.events.push(Event::Message(ProtocolEvent {
            request: self.current,
            step,
            sender: from.to_string(),
            receiver: to.to_string(),
            payload: payload.kind().to_string(),
            digest: Digest256::of(&bytes),
            bytes: bytes.len(),
            logical_time: self.time,
        }));
        if let Some(tap) = &mut self.tap {
            tap.push(bytes);
        }
        payload
    }

    fn envelope(&mut self, step: u8, from: &str, to: &str, env: Envelope) -> Envelope {
        match self.send(step, from, to, BusPayload::Envelope(env)) {
            BusPayload::Envelope(e) => e,
            BusPayload::CipherStream(_) => unreachable!(),
        }
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn tapped(&self) -> &[Vec<u8>] {
        self.tap.as_deref().unwrap_or(&[])
    }
}

// ---------------------------------------------------------------------------
// Nodes

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisteredUser {
    pub public: PublicKey,
    pub credential: Digest256,
    pub role: Role,
}

/// A session issued by one node to one user at one logical time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionToken {
    pub uid: String,
    pub node: String,
    pub issued_at: u64,
    pub mac: Digest256,
}

pub struct SacNode {
    pub node_id: String,
    keypair: KeyPair,
    pub chain: Chain,
    pub acl: Vec<AclEntry>,
    pub uid_registry: BTreeMap<String, RegisteredUser>,
    pub body_keystore: BodyKeyStore,
    pub peers: Vec<String>,
    pub directory: KeyDirectory,
    token_secret: Digest256,
    rng: ChaCha20Rng,
}

impl fmt::Debug for SacNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SacNode").field("node_id", &self.node_id).field("height", &self.chain.height()).finish_non_exhaustive()
    }
}

impl SacNode {
    pub fn new(node_id: &str, seed: u64, chain: Chain) -> Result<Self, NetworkError> {
        let keypair = generate_keypair(node_id, &derive(seed, "node-key", node_id).0)?;
        Ok(SacNode {
            node_id: node_id.to_string(),
            keypair,
            chain,
            acl: Vec::new(),
            uid_registry: BTreeMap::new(),
            body_keystore: BodyKeyStore::default(),
            peers: Vec::new(),
            directory: KeyDirectory::default(),
            token_secret: derive(seed, "token-secret", node_id),
            rng: ChaCha20Rng::from_seed(derive(seed, "node-rng", node_id).0),
        })
    }

    pub fn public(&self) -> PublicKey {
        self.keypair.public()
    }

    fn mac(&self, uid: &str, issued_at: u64) -> Digest256 {
        Digest256::of_parts(&[&self.token_secret.0, self.node_id.as_bytes(), &[0], uid.as_bytes(), &[0], &issued_at.to_le_bytes()])
    }

    /// Accepts only tokens this node issued.
    pub fn check_token(&self, token: &SessionToken) -> Result<(), NetworkError> {
        let ok = token.node == self.node_id && bool::from(self.mac(&token.uid, token.issued_at).0.ct_eq(&token.mac.0));
        ok.then_some(()).ok_or(NetworkError::InvalidSession)
    }

    fn seal(&mut self, to: &PublicKey, payload: &[u8]) -> Result<Envelope, NetworkError> {
        Ok(seal(&self.keypair, to, payload, &mut self.rng)?)
    }

    fn open(&self, env: &Envelope) -> Result<crate::envelope::Opened, NetworkError> {
        Ok(open_from(&self.keypair, &self.directory, env)?)
    }
}

pub fn authenticate_user(node: &SacNode, uid_claim: &str, credential_digest: &Digest256, now: u64) -> Result<SessionToken, NetworkError> {
    let user = node.uid_registry.get(uid_claim).ok_or_else(|| NetworkError::UnknownUser(uid_claim.to_string()))?;
    if !bool::from(user.credential.0.ct_eq(&credential_digest.0)) {
        return Err(NetworkError::CredentialMismatch);
    }
    Ok(SessionToken { uid: uid_claim.to_string(), node: node.node_id.clone(), issued_at: now, mac: node.mac(uid_claim, now) })
}

fn node_index(nodes: &[SacNode], id: &str) -> Result<usize, NetworkError> {
    nodes.iter().position(|n| n.node_id == id).ok_or_else(|| NetworkError::UnknownNode(id.to_string()))
}

/// Origin re-seals `payload` to every other node in label order; each peer
/// opens its copy. Returns the peers reached.
pub fn broadcast_request(bus: &mut Bus, nodes: &mut [SacNode], origin: usize, payload: &[u8]) -> Result<Vec<String>, NetworkError> {
    let mut order: Vec<usize> = (0..nodes.len()).filter(|&i| i != origin).collect();
    order.sort_by(|&a, &b| nodes[a].node_id.cmp(&nodes[b].node_id));
    let mut reached = Vec::with_capacity(order.len());
    for i in order {
        let to = nodes[i].public();
        let env = nodes[origin].seal(&to, payload)?;
        let (from, dest) = (nodes[origin].node_id.clone(), nodes[i].node_id.clone());
        let env = bus.envelope(3, &from, &dest, env);
        let opened = nodes[i].open(&env)?;
        if opened.payload != payload || opened.sender_label != from {
            return Err(NetworkError::Malformed);
        }
        reached.push(dest);
    }
    Ok(reached)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConsensusOutcome {
    Approved { block: Block, miner: String },
    Denied(Reason),
}

/// Round-robin miner for the next block.
pub fn miner_for(nodes: &[SacNode]) -> usize {
    nodes[0].chain.height() % nodes.len()
}

/// Mines one transaction on the round-robin miner and appends the block to
/// every replica, each validating it first.
fn mine_everywhere(nodes: &mut [SacNode], kind: TxKind, payload: Vec<u8>, clock: u64, submitter: Option<usize>) -> Result<(Block, String), NetworkError> {
    let m = miner_for(nodes);
    let tx = Transaction::signed(kind, payload, &nodes[submitter.unwrap_or(m)].keypair);
    let key = *nodes[m].body_keystore.get(BODY_KEY_ID).ok_or_else(|| NetworkError::Config("miner holds no body key".into()))?;
    let block = mine_block(&nodes[m].chain, &[tx], &nodes[m].directory, BodyKey { id: BODY_KEY_ID, key: &key }, clock)?;
    for n in nodes.iter_mut() {
        let d = n.chain.difficulty_bits;
        let tip = n.chain.tip().ok_or(NetworkError::Malformed)?;
        validate_block(tip, &block, d).map_err(|f| NetworkError::ReplicaRejected(n.node_id.clone(), LedgerError::Rejected(f)))?;
        n.chain.append(block.clone())?;
    }
    Ok((block, nodes[m].node_id.clone()))
}

/// On-chain record of an approved request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub origin: String,
    pub request: AccessRequest,
    pub access_code_digest: Digest256,
    pub approvals: Vec<String>,
}

/// Every node evaluates `req`; unanimous approval mines a `RequestRecord`
/// carrying the digest of `access_code`. Disagreement aborts the round.
pub fn consensus_round(
    nodes: &mut [SacNode],
    req: &AccessRequest,
    origin: &str,
    access_code: &str,
    clock: u64,
) -> Result<ConsensusOutcome, NetworkError> {
    let decisions: Vec<Reason> = evaluate_all(nodes, req)?.into_iter().map(|(_, r)| r).collect();
    if decisions.iter().any(|r| *r != decisions[0]) && decisions.contains(&Reason::Approved) {
        return Err(NetworkError::DivergentAcl);
    }
    if decisions[0] != Reason::Approved {
        return Ok(ConsensusOutcome::Denied(decisions[0]));
    }
    let record = RequestRecord {
        origin: origin.to_string(),
        request: req.clone(),
        access_code_digest: Digest256::of(access_code.as_bytes()),
        approvals: nodes.iter().map(|n| n.node_id.clone()).collect(),
    };
    let (block, miner) = mine_everywhere(nodes, TxKind::RequestRecord, serde_json::to_vec(&record).expect("records serialize"), clock, None)?;
    Ok(ConsensusOutcome::Approved { block, miner })
}

fn evaluate_all(nodes: &[SacNode], req: &AccessRequest) -> Result<Vec<(String, Reason)>, NetworkError> {
    if nodes.is_empty() {
        return Err(NetworkError::NoNodes);
    }
    Ok(nodes.iter().map(|n| (n.node_id.clone(), validate_request(req, &n.acl).reason)).collect())
}

/// Seals the code for the requestor (from the origin node) and the updated
/// request for the storage site (from the miner).
pub fn issue_and_forward_code(
    nodes: &mut [SacNode],
    origin: usize,
    miner: usize,
    req: &AccessRequest,
    access_code: &str,
    requestor: &PublicKey,
    storage_registry: &BTreeMap<String, PublicKey>,
) -> Result<(Envelope, Envelope), NetworkError> {
    let site = storage_registry.get(&req.storage_name).ok_or_else(|| NetworkError::UnknownStorageSite(req.storage_name.clone()))?;
    let updated = req.with_code(access_code).to_json();
    let to_requestor = nodes[origin].seal(requestor, &updated)?;
    let to_storage = nodes[miner].seal(site, &updated)?;
    Ok((to_requestor, to_storage))
}

/// Mines an audit record on every replica, submitted by `submitter`.
pub fn record_audit(nodes: &mut [SacNode], submitter: usize, record: &AuditRecord, clock: u64) -> Result<Block, NetworkError> {
    if !record.is_well_formed() {
        return Err(NetworkError::InvalidTransaction("Granted audit record without viewer watermark".into()));
    }
    let payload = serde_json::to_vec(record).expect("audit records serialize");
    Ok(mine_everywhere(nodes, TxKind::AuditRecord, payload, clock, Some(submitter))?.0)
}

// ---------------------------------------------------------------------------
// Scenario runner

struct User {
    label: String,
    uid: Option<String>,
    keypair: KeyPair,
    credential: Digest256,
    role: Role,
    device_info: String,
    rng: ChaCha20Rng,
}

impl User {
    fn seal(&mut self, to: &PublicKey, payload: &[u8]) -> Result<Envelope, NetworkError> {
        Ok(seal(&self.keypair, to, payload, &mut self.rng)?)
    }

    fn name(&self) -> &str {
        self.uid.as_deref().unwrap_or(&self.label)
    }
}

/// What the requestor received for one request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub request: usize,
    pub stream: Vec<u8>,
    pub keys: DabKeyset,
    pub frames: Vec<FrameBuffer>,
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub seed: u64,
    pub transcript: Transcript,
    pub nodes: Vec<SacNode>,
    pub sites: Vec<StorageSite>,
    pub deliveries: Vec<Delivery>,
    pub tapped: Vec<Vec<u8>>,
    pub uids: BTreeMap<String, String>,
}

impl ScenarioOutcome {
    pub fn chain(&self) -> &Chain {
        &self.nodes[0].chain
    }

    pub fn replicas_identical(&self) -> bool {
        let first = self.nodes[0].chain.to_bytes();
        self.nodes.iter().all(|n| n.chain.to_bytes() == first)
    }
}

#[derive(Serialize, Deserialize)]
struct AuthMessage {
    uid: String,
    credential: Digest256,
    device_info: String,
}

#[derive(Serialize, Deserialize)]
struct AuthReply {
    uid: String,
    token: SessionToken,
}

#[derive(Serialize, Deserialize)]
struct RequestMessage {
    token: SessionToken,
    request: AccessRequest,
}

#[derive(Serialize, Deserialize)]
struct SiteSessionReply {
    session: crate::storage::SiteSession,
}

#[derive(Serialize, Deserialize)]
struct Presentation {
    session: crate::storage::SiteSession,
    request: UpdatedRequest,
}

struct Sim {
    seed: u64,
    clock_base: u64,
    bus: Bus,
    nodes: Vec<SacNode>,
    sites: Vec<StorageSite>,
    users: BTreeMap<String, User>,
    deliveries: Vec<Delivery>,
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("protocol messages serialize")
}

fn parse<'a, T: Deserialize<'a>>(b: &'a [u8]) -> Result<T, NetworkError> {
    serde_json::from_slice(b).map_err(|_| NetworkError::Malformed)
}

impl Sim {
    fn setup(config: &ScenarioConfig, seed: u64, tap: bool) -> Result<(Self, BTreeMap<String, String>), ScenarioError> {
        let cfg = at(0);
        if config.nodes.is_empty() {
            return Err(cfg(NetworkError::NoNodes));
        }
        let mut bus = if tap { Bus::with_tap() } else { Bus::default() };
        bus.log(Event::Scenario {
            format: TRANSCRIPT_FORMAT,
            seed,
            nodes: config.nodes.clone(),
            difficulty_bits: config.difficulty_bits,
            config_digest: Digest256::of(&json(config)),
        });
        let genesis = genesis_at(config.difficulty_bits, config.clock_base).map_err(|e| cfg(e.into()))?;
        let mut nodes = config.nodes.iter().map(|id| SacNode::new(id, seed, genesis.clone())).collect::<Result<Vec<_>, _>>().map_err(&cfg)?;

        let mut directory = KeyDirectory::default();
        let dup = |l: &str| cfg(NetworkError::Config(format!("duplicate label {l}")));
        for n in &nodes {
            directory.insert(&n.node_id, n.public()).map_err(|_| dup(&n.node_id))?;
        }
        let sac_keys = directory.clone();
        let mut sites = Vec::new();
        for s in &config.storage_sites {
            let kp = generate_keypair(&s.name, &derive(seed, "site-key", &s.name).0).map_err(|e| cfg(e.into()))?;
            directory.insert(&s.name, kp.public()).map_err(|_| dup(&s.name))?;
            let mut site = StorageSite::new(kp, &s.address, sac_keys.clone(), &seed.to_le_bytes());
            for v in &s.videos {
                let rec = v.record().map_err(|e| cfg(e.into()))?;
                site.ingest_video(rec).map_err(|e| cfg(e.into()))?;
            }
            bus.log(Event::Ingested { site: s.name.clone(), segments: s.videos.len() });
            sites.push(site);
        }

        // Enrollment: each user gets a UID at their home node, replicated to all.
        let mut registry = UidRegistry::default();
        let mut users = BTreeMap::new();
        let mut uids = BTreeMap::new();
        for u in &config.users {
            node_index(&nodes, &u.enroll_at).map_err(&cfg)?;
            let uid = issue_uid(u.role.as_str(), &derive(seed, "uid", &u.label).0, &mut registry).map_err(|e| cfg(e.into()))?;
            let keypair = generate_keypair(&uid, &derive(seed, "user-key", &u.label).0).map_err(|e| cfg(e.into()))?;
            directory.insert(&uid, keypair.public()).map_err(|_| dup(&uid))?;
            for n in nodes.iter_mut() {
                n.uid_registry.insert(uid.clone(), RegisteredUser { public: keypair.public(), credential: u.credential, role: u.role });
            }
            for s in sites.iter_mut() {
                s.register_user(&uid, keypair.public(), u.credential);
            }
            bus.log(Event::Enrolled { user: u.label.clone(), node: u.enroll_at.clone(), uid: uid.clone() });
            uids.insert(u.label.clone(), uid.clone());
            let rng = ChaCha20Rng::from_seed(derive(seed, "user-rng", &u.label).0);
            users.insert(
                u.label.clone(),
                User { label: u.label.clone(), uid: Some(uid), keypair, credential: u.credential, role: u.role, device_info: u.device_info.clone(), rng },
            );
        }

        for a in &config.acl {
            let uid = uids.get(&a.user).ok_or_else(|| cfg(NetworkError::Config(format!("ACL names unknown user {}", a.user))))?;
            let entry = AclEntry {
                uid: uid.clone(),
                role: users[&a.user].role,
                allowed_cameras: a.allowed_cameras.iter().cloned().collect(),
                allowed_date_window: a.allowed_date_window,
                max_range_minutes: a.max_range_minutes,
                allowed_types: a.allowed_types.iter().copied().collect(),
                allowed_storage_sites: a.allowed_storage_sites.iter().cloned().collect(),
            };
            for n in nodes.iter_mut() {
                if a.nodes.as_ref().map_or(true, |only| only.contains(&n.node_id)) {
                    n.acl.push(entry.clone());
                }
            }
        }

        let body_key = body_key_for_seed(seed);
        let labels: Vec<String> = nodes.iter().map(|n| n.node_id.clone()).collect();
        for n in nodes.iter_mut() {
            n.directory = directory.clone();
            n.body_keystore.insert(BODY_KEY_ID, body_key);
            n.peers = labels.iter().filter(|l| **l != n.node_id).cloned().collect();
        }
        let sim = Sim { seed, clock_base: config.clock_base, bus, nodes, sites, users, deliveries: Vec::new() };
        Ok((sim, uids))
    }

    fn clock(&self) -> u64 {
        self.clock_base + self.bus.now()
    }

    fn deny(&mut self, request: usize, step: u8, reason: impl fmt::Display) {
        self.bus.log(Event::Denied { request, step, reason: reason.to_string() });
    }

    fn user_for(&mut self, s: &ScriptRequest) -> Result<User, NetworkError> {
        if let Some(u) = self.users.remove(&s.user) {
            return Ok(u);
        }
        // Not enrolled: an intruder with a self-made key and claimed name.
        let keypair = generate_keypair(&s.user, &derive(self.seed, "intruder-key", &s.user).0)?;
        Ok(User {
            label: s.user.clone(),
            uid: None,
            keypair,
            credential: s.credential.unwrap_or_default(),
            role: Role::Court,
            device_info: String::from("unknown"),
            rng: ChaCha20Rng::from_seed(derive(self.seed, "intruder-rng", &s.user).0),
        })
    }

    fn run_request(&mut self, i: usize, s: &ScriptRequest) -> Result<(), ScenarioError> {
        self.bus.current = i;
        let mut user = self.user_for(s).map_err(at(1))?;
        let result = self.drive(i, s, &mut user);
        if user.uid.is_some() {
            self.users.insert(user.label.clone(), user);
        }
        result
    }

    fn drive(&mut self, i: usize, s: &ScriptRequest, user: &mut User) -> Result<(), ScenarioError> {
        let origin = node_index(&self.nodes, &s.via).map_err(at(1))?;
        let origin_id = self.nodes[origin].node_id.clone();
        let claimed = user.name().to_string();
        let credential = s.credential.unwrap_or(user.credential);

        // Step 1: authentication and UID reply.
        let auth = AuthMessage { uid: claimed.clone(), credential, device_info: user.device_info.clone() };
        let env = user.seal(&self.nodes[origin].public(), &json(&auth)).map_err(at(1))?;
        let env = self.bus.envelope(1, &claimed, &origin_id, env);
        let token = match self.nodes[origin].open(&env) {
            Err(_) => Err(NetworkError::UnknownUser(claimed.clone())),
            Ok(o) => {
                let m: AuthMessage = parse(&o.payload).map_err(at(1))?;
                authenticate_user(&self.nodes[origin], &m.uid, &m.credential, self.bus.now())
            }
        };
        let token = match token {
            Ok(t) => t,
            Err(e) => {
                self.deny(i, 1, &e);
                return Ok(());
            }
        };
        let reply = json(&AuthReply { uid: claimed.clone(), token: token.clone() });
        let env = self.nodes[origin].seal(&user.keypair.public(), &reply).map_err(at(1))?;
        let env = self.bus.envelope(1, &origin_id, &claimed, env);
        let reply: AuthReply = parse(&crate::envelope::open(&user.keypair, &self.nodes[origin].public(), &env).map_err(|e| at(1)(e.into()))?).map_err(at(1))?;

        // Step 2: the sealed request.
        let storage_address = self
            .sites
            .iter()
            .find(|x| x.name() == s.storage_name)
            .map_or_else(String::new, |x| x.address().to_string());
        let req = AccessRequest {
            uid: reply.uid.clone(),
            camera_ids: s.camera_ids.clone(),
            date: s.date,
            range: s.range,
            kind: s.kind,
            storage_name: s.storage_name.clone(),
            storage_address,
        };
        let env = user.seal(&self.nodes[origin].public(), &json(&RequestMessage { token: reply.token, request: req })).map_err(at(2))?;
        let env = self.bus.envelope(2, &claimed, &origin_id, env);
        let opened = self.nodes[origin].open(&env).map_err(at(2))?;
        let msg: RequestMessage = parse(&opened.payload).map_err(at(2))?;
        if self.nodes[origin].check_token(&msg.token).is_err() || msg.token.uid != msg.request.uid || opened.sender_label != msg.token.uid {
            self.deny(i, 2, NetworkError::InvalidSession);
            return Ok(());
        }
        let req = msg.request;

        // Step 3: broadcast to peers.
        broadcast_request(&mut self.bus, &mut self.nodes, origin, &req.to_json()).map_err(at(3))?;

        // Step 4: distributed validation.
        for (node, reason) in evaluate_all(&self.nodes, &req).map_err(at(4))? {
            self.bus.log(Event::Decision { request: i, step: 4, node, reason });
        }

        // Steps 5 and 6. The code is drawn first so the block can commit to it.
        let role = self.nodes[origin].uid_registry.get(&req.uid).map(|u| u.role).ok_or_else(|| at(5)(NetworkError::UnknownUser(req.uid.clone())))?;
        let code = generate_access_code(role.as_str(), &req.storage_name, &derive(self.seed, "access-code", &format!("{i}")).0).map_err(|e| at(6)(e.into()))?;
        let storage_registry: BTreeMap<String, PublicKey> = self.sites.iter().map(|x| (x.name().to_string(), x.public())).collect();
        if !storage_registry.contains_key(&req.storage_name) {
            self.deny(i, 5, NetworkError::UnknownStorageSite(req.storage_name.clone()));
            return Ok(());
        }
        let miner = miner_for(&self.nodes);
        let clock = self.clock();
        let outcome = match consensus_round(&mut self.nodes, &req, &origin_id, &code, clock) {
            Err(NetworkError::DivergentAcl) => {
                self.bus.log(Event::Consensus { request: i, step: 5, outcome: "DivergentAcl".into() });
                self.deny(i, 5, NetworkError::DivergentAcl);
                return Ok(());
            }
            other => other.map_err(at(5))?,
        };
        let block = match outcome {
            ConsensusOutcome::Denied(r) => {
                self.bus.log(Event::Consensus { request: i, step: 5, outcome: format!("{r:?}") });
                self.deny(i, 5, format!("{r:?}"));
                return Ok(());
            }
            ConsensusOutcome::Approved { block, .. } => block,
        };
        self.bus.log(Event::Consensus { request: i, step: 5, outcome: "Approved".into() });
        self.bus.log(Event::Block {
            request: i,
            step: 5,
            height: self.nodes[0].chain.height() - 1,
            hash: block.hash(),
            miner: self.nodes[miner].node_id.clone(),
            kind: TxKind::RequestRecord,
            attempts_nonce: block.header.nonce,
        });
        self.bus.log(Event::CodeIssued { request: i, step: 6, code_digest: Digest256::of(code.as_bytes()) });

        // Step 7: double lock-boxes to the requestor and the storage site.
        let (to_user, to_site) =
            issue_and_forward_code(&mut self.nodes, origin, miner, &req, &code, &user.keypair.public(), &storage_registry).map_err(at(7))?;
        let miner_id = self.nodes[miner].node_id.clone();
        let to_user = self.bus.envelope(7, &origin_id, &claimed, to_user);
        let to_site = self.bus.envelope(7, &miner_id, &req.storage_name, to_site);
        let updated = UpdatedRequest::from_json(&crate::envelope::open(&user.keypair, &self.nodes[origin].public(), &to_user).map_err(|e| at(7)(e.into()))?)
            .map_err(|_| at(7)(NetworkError::Malformed))?;
        let site_idx = self.sites.iter().position(|x| x.name() == req.storage_name).expect("checked above");
        let now = self.bus.now();
        self.sites[site_idx].receive_forwarded_request(&to_site, now).map_err(|e| at(7)(e.into()))?;
        self.bus.log(Event::Grant { request: i, step: 7, site: req.storage_name.clone() });

        // Step 8: authenticate at the storage site.
        let site_pub = self.sites[site_idx].public();
        let site_name = self.sites[site_idx].name().to_string();
        let auth = AuthMessage { uid: claimed.clone(), credential, device_info: user.device_info.clone() };
        let env = user.seal(&site_pub, &json(&auth)).map_err(at(8))?;
        let env = self.bus.envelope(8, &claimed, &site_name, env);
        let m: AuthMessage = parse(&self.sites[site_idx].open_message(&env).map_err(|e| at(8)(e.into()))?.payload).map_err(at(8))?;
        let session = match self.sites[site_idx].authenticate(&m.uid, &m.credential, &m.device_info) {
            Ok(t) => t,
            Err(e) => {
                self.deny(i, 8, e);
                return Ok(());
            }
        };
        let env = self.sites[site_idx].seal_to(&user.keypair.public(), &json(&SiteSessionReply { session })).map_err(|e| at(8)(e.into()))?;
        let env = self.bus.envelope(8, &site_name, &claimed, env);
        let session = parse::<SiteSessionReply>(&crate::envelope::open(&user.keypair, &site_pub, &env).map_err(|e| at(8)(e.into()))?).map_err(at(8))?.session;

        // Steps 9 and 10, plus an optional replay of the presentation.
        for _ in 0..(1 + usize::from(s.replay)) {
            let env = user.seal(&site_pub, &json(&Presentation { session, request: updated.clone() })).map_err(at(9))?;
            let env = self.bus.envelope(9, &claimed, &site_name, env);
            let p: Presentation = parse(&self.sites[site_idx].open_message(&env).map_err(|e| at(9)(e.into()))?.payload).map_err(at(9))?;
            let now = self.bus.now();
            let served = match self.sites[site_idx].serve_request(&p.session, &p.request, now) {
                Ok(s) => s,
                Err(e) => {
                    self.deny(i, 10, e);
                    continue;
                }
            };
            let stream = match self.bus.send(10, &site_name, &claimed, BusPayload::CipherStream(served.stream)) {
                BusPayload::CipherStream(b) => b,
                BusPayload::Envelope(_) => unreachable!(),
            };
            let keys_env = self.bus.envelope(10, &site_name, &claimed, served.keys_envelope);
            let keys: DabKeyset = parse(&crate::envelope::open(&user.keypair, &site_pub, &keys_env).map_err(|e| at(10)(e.into()))?).map_err(at(10))?;
            let frames = wire::decode_stream(&stream)
                .and_then(|cfs| cfs.iter().map(|cf| decipher_frame(cf, &keys)).collect::<Result<Vec<_>, _>>())
                .map_err(|e| at(10)(NetworkError::Storage(e.into())))?;
            self.bus.log(Event::Served { request: i, step: 10, frames: served.frame_count, stream_digest: Digest256::of(&stream), deciphered: frames.len() == served.frame_count });
            self.deliveries.push(Delivery { request: i, stream, keys, frames });

            // The site reports the access to the origin node, which submits it.
            let env = self.sites[site_idx].seal_audit(&served.audit, &self.nodes[origin].public()).map_err(|e| at(10)(e.into()))?;
            let env = self.bus.envelope(10, &site_name, &origin_id, env);
            let opened = self.nodes[origin].open(&env).map_err(at(10))?;
            let record: AuditRecord = parse(&opened.payload).map_err(at(10))?;
            let audit_miner = miner_for(&self.nodes);
            let clock = self.clock();
            let block = record_audit(&mut self.nodes, origin, &record, clock).map_err(at(10))?;
            self.bus.log(Event::Block {
                request: i,
                step: 10,
                height: self.nodes[0].chain.height() - 1,
                hash: block.hash(),
                miner: self.nodes[audit_miner].node_id.clone(),
                kind: TxKind::AuditRecord,
                attempts_nonce: block.header.nonce,
            });
        }
        Ok(())
    }
}

/// Options that only tests need.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub tap: bool,
}

pub fn run_scenario(config: &ScenarioConfig, seed: u64) -> Result<ScenarioOutcome, ScenarioError> {
    run_scenario_with(config, seed, RunOptions::default())
}

pub fn run_scenario_with(config: &ScenarioConfig, seed: u64, opts: RunOptions) -> Result<ScenarioOutcome, ScenarioError> {
    let (mut sim, uids) = Sim::setup(config, seed, opts.tap)?;
    for (i, s) in config.script.iter().enumerate() {
        sim.run_request(i, s)?;
    }
    let first = sim.nodes[0].chain.to_bytes();
    let identical = sim.nodes.iter().all(|n| n.chain.to_bytes() == first);
    let tip = sim.nodes[0].chain.tip().map(Block::hash).unwrap_or_default();
    sim.bus.log(Event::Done { height: sim.nodes[0].chain.height(), tip, replicas_identical: identical });
    Ok(ScenarioOutcome {
        seed,
        transcript: sim.bus.transcript.clone(),
        tapped: sim.bus.tapped().to_vec(),
        nodes: sim.nodes,
        sites: sim.sites,
        deliveries: sim.deliveries,
        uids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{decrypt_body, validate_chain};

    fn court() -> ScenarioOutcome {
        run_scenario(&ScenarioConfig::court(), 2021).unwrap()
    }

    #[test]
    fn court_walkthrough() {
        let out = court();
        assert_eq!(out.chain().height(), 3);
        assert!(out.replicas_identical());
        assert!(validate_chain(out.chain()).is_ok());
        assert_eq!(out.transcript.steps_for(0), (1..=10).collect::<Vec<u8>>());
        assert_eq!(out.deliveries.len(), 1);
        assert_eq!(out.deliveries[0].frames.len(), 120);

        let txs: Vec<Transaction> = out.chain().blocks[1..].iter().flat_map(|b| decrypt_body(b, &out.nodes[3].body_keystore).unwrap()).collect();
        assert_eq!(txs.iter().map(|t| t.kind).collect::<Vec<_>>(), [TxKind::RequestRecord, TxKind::AuditRecord]);
        let audit: AuditRecord = serde_json::from_slice(&txs[1].payload).unwrap();
        assert_eq!(audit.action, AuditAction::Granted);
        assert_eq!(audit.viewer_watermark, credential_digest(b"court fingerprint").to_hex());
        let uid = &out.uids["court"];
        assert!(uid.starts_with("court") && uid.len() == 44);
    }

    #[test]
    fn deterministic_transcript() {
        let a = court();
        let b = court();
        assert_eq!(a.transcript.to_jsonl(), b.transcript.to_jsonl());
        assert_eq!(a.chain().to_bytes(), b.chain().to_bytes());
        let c = run_scenario(&ScenarioConfig::court(), 2022).unwrap();
        assert_ne!(a.transcript.digest(), c.transcript.digest());
        assert_eq!(Transcript::from_jsonl(&a.transcript.to_jsonl()).unwrap(), a.transcript);
    }

    #[test]
    fn intruder_denied_at_step_one() {
        let mut cfg = ScenarioConfig::court();
        cfg.script[0].user = "mallory".into();
        let out = run_scenario(&cfg, 1).unwrap();
        assert_eq!(out.chain().height(), 1);
        assert!(out.transcript.events.iter().any(|e| matches!(e, Event::Denied { step: 1, .. })));
    }

    #[test]
    fn wrong_credential_denied() {
        let mut cfg = ScenarioConfig::court();
        let mut bad = credential_digest(b"court fingerprint");
        bad.0[0] ^= 1;
        cfg.script[0].credential = Some(bad);
        let out = run_scenario(&cfg, 1).unwrap();
        assert!(out.transcript.events.iter().any(|e| matches!(e, Event::Denied { step: 1, reason, .. } if reason.contains("CredentialMismatch"))));
        assert_eq!(out.chain().height(), 1);
    }

    #[test]
    fn acl_violation_and_divergence() {
        let mut cfg = ScenarioConfig::court();
        cfg.script[0].range = TimeRange::new("08:00".parse().unwrap(), "18:00".parse().unwrap()).unwrap();
        let out = run_scenario(&cfg, 1).unwrap();
        assert_eq!(out.chain().height(), 1);
        assert!(out.transcript.events.iter().any(|e| matches!(e, Event::Consensus { outcome, .. } if outcome == "RangeExceeded")));

        let mut cfg = ScenarioConfig::court();
        cfg.acl[0].nodes = Some(alloc::vec!["SAC_1".into(), "SAC_2".into(), "SAC_3".into(), "SAC_4".into()]);
        let out = run_scenario(&cfg, 1).unwrap();
        assert_eq!(out.chain().height(), 1);
        assert!(out.transcript.events.iter().any(|e| matches!(e, Event::Consensus { outcome, .. } if outcome == "DivergentAcl")));
    }

    #[test]
    fn replay_rejected() {
        let mut cfg = ScenarioConfig::court();
        cfg.script[0].replay = true;
        let out = run_scenario(&cfg, 1).unwrap();
        assert_eq!(out.chain().height(), 3);
        assert!(out.transcript.events.iter().any(|e| matches!(e, Event::Denied { step: 10, reason, .. } if reason.contains("CodeAlreadyConsumed"))));
    }

    #[test]
    fn tokens_are_node_bound() {
        let out = court();
        let uid = &out.uids["court"];
        let cred = credential_digest(b"court fingerprint");
        let t = authenticate_user(&out.nodes[1], uid, &cred, 5).unwrap();
        assert!(out.nodes[1].check_token(&t).is_ok());
        assert_eq!(out.nodes[2].check_token(&t), Err(NetworkError::InvalidSession));
        let mut forged = t.clone();
        forged.node = "SAC_3".into();
        assert_eq!(out.nodes[2].check_token(&forged), Err(NetworkError::InvalidSession));
        let mut off = cred;
        off.0[31] ^= 0x80;
        assert_eq!(authenticate_user(&out.nodes[1], uid, &off, 5), Err(NetworkError::CredentialMismatch));
        assert!(matches!(authenticate_user(&out.nodes[1], "nobody", &cred, 5), Err(NetworkError::UnknownUser(_))));
    }

    #[test]
    fn broadcast_reaches_every_peer_once() {
        let out = court();
        let deliveries: Vec<&ProtocolEvent> = out
            .transcript
            .events
            .iter()
            .filter_map(|e| match e {
                Event::Message(m) if m.step == 3 => Some(m),
                _ => None,
            })
            .collect();
        assert_eq!(deliveries.len(), 4);
        assert!(deliveries.iter().all(|m| m.sender == "SAC_2" && m.receiver != "SAC_2"));
        let receivers: Vec<&str> = deliveries.iter().map(|m| m.receiver.as_str()).collect();
        assert_eq!(receivers, ["SAC_1", "SAC_3", "SAC_4", "SAC_5"]);
    }

    #[test]
    fn audit_without_watermark_is_rejected() {
        let mut out = court();
        let rec = AuditRecord {
            requestor_uid: "x".into(),
            device_info: String::new(),
            accessed_reference: Vec::new(),
            viewer_watermark: String::new(),
            action: AuditAction::Granted,
            timestamp: 0,
        };
        assert!(matches!(record_audit(&mut out.nodes, 0, &rec, 0), Err(NetworkError::InvalidTransaction(_))));
        let ok = AuditRecord { viewer_watermark: "ab".into(), ..rec };
        record_audit(&mut out.nodes, 0, &ok, u64::MAX / 2).unwrap();
        assert!(validate_chain(out.chain()).is_ok());
        assert_eq!(out.chain().height(), 4);
    }

    #[test]
    fn consensus_edge_cases() {
        let mut none: Vec<SacNode> = Vec::new();
        let req = AccessRequest::from_json(br#"{"uid":"u","camera_ids":["c"],"date":"2021-01-01","range":{"start":"01:00","end":"02:00"},"type":"activities","storage_name":"s","storage_address":""}"#).unwrap();
        assert_eq!(consensus_round(&mut none, &req, "x", "c", 0), Err(NetworkError::NoNodes));

        let mut out = court();
        let reg = BTreeMap::new();
        let pk = out.nodes[0].public();
        assert!(matches!(issue_and_forward_code(&mut out.nodes, 0, 1, &req, "code", &pk, &reg), Err(NetworkError::UnknownStorageSite(_))));
    }
}
