//! The off-chain storage site.
//!
//! Video is held in plaintext at rest and only leaves the site enciphered.
//! A request is served once: the site must hold a forwarded copy from the
//! network, the requestor must authenticate here as well, and the presented
//! copy must match the forwarded one field for field.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use subtle::ConstantTimeEq;
use thiserror::Error;

use crate::contract::{CodeRegistry, ContractError, Date, UpdatedRequest};
use crate::dab::{encipher_frame, wire, DabError, DabKeyset, FrameBuffer};
use crate::envelope::{open_from, seal, Envelope, EnvelopeError, KeyDirectory, KeyPair, Opened, PublicKey};
use crate::Digest256;

/// Default grant lifetime in logical seconds.
pub const DEFAULT_TTL: u64 = 3600;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StorageError {
    #[error("invalid video record: {0}")]
    InvalidRecord(&'static str),
    #[error("DuplicateSegment: overlaps {0}")]
    DuplicateSegment(OpaqueRef),
    #[error("UnknownUser: {0}")]
    UnknownUser(String),
    #[error("CredentialMismatch")]
    CredentialMismatch,
    #[error("session does not belong to the requesting user")]
    Unauthorized,
    #[error("NoMatchingGrant")]
    NoMatchingGrant,
    #[error("CodeAlreadyConsumed: {0}")]
    CodeAlreadyConsumed(String),
    #[error("SegmentNotFound: camera {camera} on {date}")]
    SegmentNotFound { camera: String, date: Date },
    #[error("forwarded request is not valid JSON")]
    MalformedRequest,
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Dab(#[from] DabError),
}

impl From<ContractError> for StorageError {
    fn from(e: ContractError) -> Self {
        match e {
            ContractError::CodeAlreadyConsumed(c) => StorageError::CodeAlreadyConsumed(c),
            _ => StorageError::NoMatchingGrant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoRecord {
    camera_id: String,
    date: Date,
    start_seconds: u32,
    fps: u8,
    frames: Vec<FrameBuffer>,
}

impl VideoRecord {
    pub fn new(camera_id: &str, date: Date, start_seconds: u32, fps: u8, frames: Vec<FrameBuffer>) -> Result<Self, StorageError> {
        if camera_id.is_empty() {
            return Err(StorageError::InvalidRecord("camera id is empty"));
        }
        if fps == 0 {
            return Err(StorageError::InvalidRecord("fps must be positive"));
        }
        let first = frames.first().ok_or(StorageError::InvalidRecord("no frames"))?;
        if !frames.iter().all(|f| f.same_shape(first)) {
            return Err(StorageError::InvalidRecord("frames differ in shape"));
        }
        if start_seconds >= 86_400 {
            return Err(StorageError::InvalidRecord("start time is past midnight"));
        }
        Ok(VideoRecord { camera_id: camera_id.to_string(), date, start_seconds, fps, frames })
    }

    pub fn camera_id(&self) -> &str {
        &self.camera_id
    }

    pub fn date(&self) -> Date {
        self.date
    }

    pub fn start_seconds(&self) -> u32 {
        self.start_seconds
    }

    pub fn fps(&self) -> u8 {
        self.fps
    }

    pub fn frames(&self) -> &[FrameBuffer] {
        &self.frames
    }

    /// Covered time as `[start, end)` in frame ticks (1/fps s), scaled to a
    /// common unit so records with different rates compare.
    fn span_micros(&self) -> (u64, u64) {
        let start = u64::from(self.start_seconds) * 1_000_000;
        let len = (self.frames.len() as u64 * 1_000_000).div_ceil(u64::from(self.fps));
        (start, start + len)
    }

    /// Frames whose timestamps lie in `[from_s, to_s)`.
    pub fn frames_between(&self, from_s: u32, to_s: u32) -> &[FrameBuffer] {
        let fps = u64::from(self.fps);
        let origin = u64::from(self.start_seconds) * fps;
        let lo = (u64::from(from_s) * fps).saturating_sub(origin).min(self.frames.len() as u64) as usize;
        let hi = (u64::from(to_s) * fps).saturating_sub(origin).min(self.frames.len() as u64) as usize;
        &self.frames[lo..hi.max(lo)]
    }
}

/// Opaque handle to a stored segment. Carries no path or camera data.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OpaqueRef(Digest256);

impl fmt::Display for OpaqueRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ref:{}", &self.0.to_hex()[..32])
    }
}

impl fmt::Debug for OpaqueRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub camera_id: String,
    pub date: Date,
    pub start_seconds: u32,
    pub frame_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MappingTable {
    pub entries: BTreeMap<OpaqueRef, Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrantState {
    Pending,
    Consumed,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grant {
    pub updated_request: UpdatedRequest,
    pub state: GrantState,
    pub received_at: u64,
    pub session_keys: DabKeyset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuditAction {
    Viewed,
    Granted,
    Denied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub requestor_uid: String,
    pub device_info: String,
    pub accessed_reference: Vec<OpaqueRef>,
    /// Credential digest of the viewer; empty only for denials.
    pub viewer_watermark: String,
    pub action: AuditAction,
    pub timestamp: u64,
}

impl AuditRecord {
    pub fn is_well_formed(&self) -> bool {
        self.action != AuditAction::Granted || !self.viewer_watermark.is_empty()
    }
}

/// Session token bound to one user at one site.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct SiteSession(pub Digest256);

struct SiteUser {
    public: PublicKey,
    credential: Digest256,
}

struct Session {
    uid: String,
    device_info: String,
}

/// What a successful serve hands back.
#[derive(Debug, Clone)]
pub struct Served {
    /// Length-prefixed SPRC records, one per frame.
    pub stream: Vec<u8>,
    pub frame_count: usize,
    /// The session [`DabKeyset`] as JSON, sealed to the requestor.
    pub keys_envelope: Envelope,
    pub audit: AuditRecord,
}

pub struct StorageSite {
    keypair: KeyPair,
    address: String,
    sac_keys: KeyDirectory,
    users: BTreeMap<String, SiteUser>,
    videos: BTreeMap<OpaqueRef, VideoRecord>,
    mapping: MappingTable,
    grants: BTreeMap<String, Grant>,
    codes: CodeRegistry,
    sessions: BTreeMap<SiteSession, Session>,
    ttl: u64,
    seed: Digest256,
    rng: ChaCha20Rng,
    counter: u64,
}

impl fmt::Debug for StorageSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StorageSite")
            .field("name", &self.name())
            .field("segments", &self.mapping.entries.len())
            .field("grants", &self.grants.len())
            .finish_non_exhaustive()
    }
}

impl StorageSite {
    /// `seed` drives session keys and envelope ephemerals, so a site replays
    /// identically given the same seed and inputs.
    pub fn new(keypair: KeyPair, address: &str, sac_keys: KeyDirectory, seed: &[u8]) -> Self {
        let seed = Digest256::of_parts(&[b"sepris/storage/v1", keypair.label().as_bytes(), &[0], seed]);
        StorageSite {
            keypair,
            address: address.to_string(),
            sac_keys,
            users: BTreeMap::new(),
            videos: BTreeMap::new(),
            mapping: MappingTable::default(),
            grants: BTreeMap::new(),
            codes: CodeRegistry::default(),
            sessions: BTreeMap::new(),
            ttl: DEFAULT_TTL,
            rng: ChaCha20Rng::from_seed(Digest256::of_parts(&[&seed.0, b"rng"]).0),
            seed,
            counter: 0,
        }
    }

    pub fn name(&self) -> &str {
        self.keypair.label()
    }

    pub fn address(&self) -> &str {
        &self.address
    }

    pub fn public(&self) -> PublicKey {
        self.keypair.public()
    }

    pub fn set_ttl(&mut self, ttl: u64) {
        self.ttl = ttl;
    }

    pub fn mapping(&self) -> &MappingTable {
        &self.mapping
    }

    pub fn grant(&self, code: &str) -> Option<&Grant> {
        self.grants.get(code)
    }

    pub fn grants(&self) -> impl Iterator<Item = &Grant> {
        self.grants.values()
    }

    pub fn register_user(&mut self, uid: &str, public: PublicKey, credential: Digest256) {
        self.users.insert(uid.to_string(), SiteUser { public, credential });
    }

    fn next_tag(&mut self, domain: &[u8], parts: &[&[u8]]) -> Digest256 {
        self.counter += 1;
        let mut all: Vec<&[u8]> = alloc::vec![domain, &self.seed.0];
        let c = self.counter.to_le_bytes();
        all.push(&c);
        all.extend_from_slice(parts);
        Digest256::of_parts(&all)
    }

    pub fn ingest_video(&mut self, record: VideoRecord) -> Result<OpaqueRef, StorageError> {
        let (s, e) = record.span_micros();
        for (r, v) in &self.videos {
            let (vs, ve) = v.span_micros();
            if v.camera_id == record.camera_id && v.date == record.date && s < ve && vs < e {
                return Err(StorageError::DuplicateSegment(*r));
            }
        }
        let r = OpaqueRef(self.next_tag(b"sepris/storage/ref", &[]));
        self.mapping.entries.insert(
            r,
            Segment { camera_id: record.camera_id.clone(), date: record.date, start_seconds: record.start_seconds, frame_count: record.frames.len() },
        );
        self.videos.insert(r, record);
        Ok(r)
    }

    pub fn video(&self, r: &OpaqueRef) -> Option<&VideoRecord> {
        self.videos.get(r)
    }

    /// Frames for one camera and day in `[from_s, to_s)`, in time order,
    /// with the references they came from.
    pub fn query(&self, camera: &str, date: Date, from_s: u32, to_s: u32) -> Result<(Vec<OpaqueRef>, Vec<&FrameBuffer>), StorageError> {
        let mut hits: Vec<(&OpaqueRef, &VideoRecord)> =
            self.videos.iter().filter(|(_, v)| v.camera_id == camera && v.date == date).collect();
        hits.sort_by_key(|(_, v)| v.start_seconds);
        let mut refs = Vec::new();
        let mut frames = Vec::new();
        for (r, v) in hits {
            let got = v.frames_between(from_s, to_s);
            if !got.is_empty() {
                refs.push(*r);
                frames.extend(got);
            }
        }
        if frames.is_empty() {
            return Err(StorageError::SegmentNotFound { camera: camera.to_string(), date });
        }
        Ok((refs, frames))
    }

    /// Storage-side identity check. The digest comparison is constant time.
    pub fn authenticate(&mut self, uid: &str, credential: &Digest256, device_info: &str) -> Result<SiteSession, StorageError> {
        let user = self.users.get(uid).ok_or_else(|| StorageError::UnknownUser(uid.to_string()))?;
        if !bool::from(user.credential.0.ct_eq(&credential.0)) {
            return Err(StorageError::CredentialMismatch);
        }
        let token = SiteSession(self.next_tag(b"sepris/storage/session", &[uid.as_bytes()]));
        self.sessions.insert(token, Session { uid: uid.to_string(), device_info: device_info.to_string() });
        Ok(token)
    }

    /// Opens a request forwarded by a network node and records a pending
    /// grant. A second copy of the same code returns the existing grant.
    pub fn receive_forwarded_request(&mut self, env: &Envelope, now: u64) -> Result<Grant, StorageError> {
        let opened = open_from(&self.keypair, &self.sac_keys, env)?;
        let req = UpdatedRequest::from_json(&opened.payload).map_err(|_| StorageError::MalformedRequest)?;
        if let Some(g) = self.grants.get(&req.access_code) {
            return Ok(g.clone());
        }
        let mut key_rng = ChaCha20Rng::from_seed(Digest256::of_parts(&[b"sepris/storage/keys", &self.seed.0, req.access_code.as_bytes()]).0);
        let session_keys = DabKeyset::generate(&mut key_rng, 50)?;
        let grant = Grant { updated_request: req.clone(), state: GrantState::Pending, received_at: now, session_keys };
        self.codes.register(&req.access_code);
        self.grants.insert(req.access_code, grant.clone());
        Ok(grant)
    }

    pub fn serve_request(&mut self, session: &SiteSession, presented: &UpdatedRequest, now: u64) -> Result<Served, StorageError> {
        let (uid, device_info) = match self.sessions.get(session) {
            Some(s) if s.uid == presented.request.uid => (s.uid.clone(), s.device_info.clone()),
            _ => return Err(StorageError::Unauthorized),
        };
        let grant = self.grants.get(&presented.access_code).ok_or(StorageError::NoMatchingGrant)?;
        match grant.state {
            GrantState::Consumed => return Err(StorageError::CodeAlreadyConsumed(presented.access_code.clone())),
            GrantState::Expired => return Err(StorageError::NoMatchingGrant),
            GrantState::Pending if grant.updated_request != *presented => return Err(StorageError::NoMatchingGrant),
            GrantState::Pending => {}
        }
        let keys = grant.session_keys.clone();
        let req = &presented.request;
        let (from_s, to_s) = (req.range.start().seconds(), req.range.end().seconds());

        // Everything that can fail happens before the code is spent.
        let mut refs = Vec::new();
        let mut frames = Vec::new();
        for cam in &req.camera_ids {
            let (r, f) = self.query(cam, req.date, from_s, to_s)?;
            refs.extend(r);
            frames.extend(f);
        }
        let mut records = Vec::with_capacity(frames.len());
        for (i, f) in frames.iter().enumerate() {
            records.push(encipher_frame(f, &keys, i as u64)?);
        }
        let requestor = self.users.get(&uid).ok_or_else(|| StorageError::UnknownUser(uid.clone()))?;
        let (requestor_pub, watermark) = (requestor.public, requestor.credential.to_hex());
        let keys_json = serde_json::to_vec(&keys).expect("keyset serializes");

        if !self.codes.match_requests(presented, &self.grants[&presented.access_code].updated_request)? {
            return Err(StorageError::NoMatchingGrant);
        }
        let keys_envelope = seal(&self.keypair, &requestor_pub, &keys_json, &mut self.rng)?;
        self.grants.get_mut(&presented.access_code).expect("grant exists").state = GrantState::Consumed;
        let frame_count = records.len();
        Ok(Served {
            stream: wire::encode_stream(&records),
            frame_count,
            keys_envelope,
            audit: AuditRecord {
                requestor_uid: uid,
                device_info,
                accessed_reference: refs,
                viewer_watermark: watermark,
                action: AuditAction::Granted,
                timestamp: now,
            },
        })
    }

    /// Marks pending grants older than the TTL as expired.
    pub fn expire_grants(&mut self, now: u64) -> usize {
        let mut n = 0;
        for g in self.grants.values_mut() {
            if g.state == GrantState::Pending && now.saturating_sub(g.received_at) > self.ttl {
                g.state = GrantState::Expired;
                n += 1;
            }
        }
        n
    }

    /// Opens a message from a registered user or a known network node.
    pub fn open_message(&self, env: &Envelope) -> Result<Opened, StorageError> {
        let mut dir = self.sac_keys.clone();
        for (uid, u) in &self.users {
            // A user label shadowing a node label keeps the node's key.
            let _ = dir.insert(uid, u.public);
        }
        Ok(open_from(&self.keypair, &dir, env)?)
    }

    pub fn seal_to(&mut self, to: &PublicKey, payload: &[u8]) -> Result<Envelope, StorageError> {
        Ok(seal(&self.keypair, to, payload, &mut self.rng)?)
    }

    /// Seals an audit record for a network node.
    pub fn seal_audit(&mut self, record: &AuditRecord, node: &PublicKey) -> Result<Envelope, StorageError> {
        let body = serde_json::to_vec(record).expect("audit records serialize");
        Ok(seal(&self.keypair, node, &body, &mut self.rng)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::{AccessRequest, RequestType, TimeRange};
    use crate::dab::{decipher_frame, decode_plane, encode_plane};
    use crate::envelope::{generate_keypair, open};
    use crate::synth;
    use alloc::vec;

    struct Fixture {
        site: StorageSite,
        sac: KeyPair,
        court: KeyPair,
        cred: Digest256,
        rng: ChaCha20Rng,
    }

    fn date() -> Date {
        "2021-03-14".parse().unwrap()
    }

    fn fixture() -> Fixture {
        let sac = generate_keypair("SAC_5", b"sac5").unwrap();
        let court = generate_keypair("court1", b"court").unwrap();
        let mut dir = KeyDirectory::default();
        dir.insert("SAC_5", sac.public()).unwrap();
        let mut site = StorageSite::new(generate_keypair("CloudNVR", b"nvr").unwrap(), "nvr.local", dir, b"site-seed");
        let cred = Digest256::of(b"court fingerprint");
        site.register_user("court1", court.public(), cred);
        // 10:00:00 to 10:00:04 at 2 fps.
        let frames = (0..8).map(|i| synth::natural_image(40, 32, 1, i)).collect();
        site.ingest_video(VideoRecord::new("cam-07", date(), 36_000, 2, frames).unwrap()).unwrap();
        Fixture { site, sac, court, cred, rng: ChaCha20Rng::seed_from_u64(1) }
    }

    fn updated(code: &str) -> UpdatedRequest {
        AccessRequest {
            uid: "court1".into(),
            camera_ids: vec!["cam-07".into()],
            date: date(),
            range: TimeRange::new("10:00".parse().unwrap(), "10:01".parse().unwrap()).unwrap(),
            kind: RequestType::WholeContext,
            storage_name: "CloudNVR".into(),
            storage_address: "nvr.local".into(),
        }
        .with_code(code)
    }

    fn forward(fx: &mut Fixture, code: &str) -> Envelope {
        seal(&fx.sac, &fx.site.public(), &updated(code).to_json(), &mut fx.rng).unwrap()
    }

    #[test]
    fn ingest_and_overlap() {
        let mut fx = fixture();
        let (refs, frames) = fx.site.query("cam-07", date(), 36_000, 36_001).unwrap();
        assert_eq!((refs.len(), frames.len()), (1, 2));
        assert_eq!(*frames[1], synth::natural_image(40, 32, 1, 1));
        let r = refs[0];
        assert!(!alloc::format!("{r}").contains("cam-07"));

        let clash = VideoRecord::new("cam-07", date(), 36_003, 2, vec![synth::noise_image(40, 32, 1, 0); 4]).unwrap();
        assert_eq!(fx.site.ingest_video(clash), Err(StorageError::DuplicateSegment(r)));
        // Adjacent span is fine; so is another camera.
        let next = VideoRecord::new("cam-07", date(), 36_004, 2, vec![synth::noise_image(40, 32, 1, 0); 4]).unwrap();
        fx.site.ingest_video(next).unwrap();
        let other = VideoRecord::new("cam-08", date(), 36_000, 2, vec![synth::noise_image(40, 32, 1, 0); 4]).unwrap();
        fx.site.ingest_video(other).unwrap();
        assert_eq!(fx.site.query("cam-07", date(), 36_000, 36_010).unwrap().1.len(), 12);
        assert!(matches!(fx.site.query("cam-09", date(), 0, 86_400), Err(StorageError::SegmentNotFound { .. })));
    }

    #[test]
    fn record_validation() {
        let f = synth::noise_image(8, 8, 1, 0);
        assert!(VideoRecord::new("c", date(), 0, 0, vec![f.clone()]).is_err());
        assert!(VideoRecord::new("c", date(), 0, 1, vec![]).is_err());
        assert!(VideoRecord::new("c", date(), 0, 1, vec![f, synth::noise_image(8, 9, 1, 0)]).is_err());
    }

    #[test]
    fn forwarded_requests() {
        let mut fx = fixture();
        let env = forward(&mut fx, "courtToCloudNVR000000000000000001");
        let g = fx.site.receive_forwarded_request(&env, 10).unwrap();
        assert_eq!(g.state, GrantState::Pending);
        let again = forward(&mut fx, "courtToCloudNVR000000000000000001");
        assert_eq!(fx.site.receive_forwarded_request(&again, 20).unwrap(), g);
        assert_eq!(fx.site.grants().count(), 1);

        let rogue = generate_keypair("SAC_5", b"imposter").unwrap();
        let env = seal(&rogue, &fx.site.public(), &updated("x").to_json(), &mut fx.rng).unwrap();
        assert_eq!(fx.site.receive_forwarded_request(&env, 0), Err(StorageError::Envelope(EnvelopeError::SignatureInvalid)));
    }

    #[test]
    fn serve_end_to_end() {
        let mut fx = fixture();
        let code = "courtToCloudNVR000000000000000002";
        let env = forward(&mut fx, code);
        fx.site.receive_forwarded_request(&env, 0).unwrap();

        assert_eq!(fx.site.authenticate("court1", &Digest256::of(b"wrong"), "tablet").unwrap_err(), StorageError::CredentialMismatch);
        let session = fx.site.authenticate("court1", &fx.cred, "tablet").unwrap();

        let mut altered = updated(code);
        altered.request.date = "2021-03-15".parse().unwrap();
        assert!(matches!(fx.site.serve_request(&session, &altered, 5), Err(StorageError::NoMatchingGrant)));

        let served = fx.site.serve_request(&session, &updated(code), 5).unwrap();
        // Two fps over a 60 s range, but only 4 s are stored.
        assert_eq!(served.frame_count, 8);
        assert_eq!(served.audit.action, AuditAction::Granted);
        assert_eq!(served.audit.viewer_watermark, fx.cred.to_hex());
        assert!(served.audit.is_well_formed());

        let keys: DabKeyset = serde_json::from_slice(&open(&fx.court, &fx.site.public(), &served.keys_envelope).unwrap()).unwrap();
        let records = wire::decode_stream(&served.stream).unwrap();
        assert_eq!(records.len(), 8);
        for (i, cf) in records.iter().enumerate() {
            let plain = synth::natural_image(40, 32, 1, i as u64);
            let oracle = decode_plane(&encode_plane(&plain, keys.quality).unwrap(), keys.quality).unwrap();
            assert_eq!(decipher_frame(cf, &keys).unwrap(), oracle);
        }

        assert!(matches!(fx.site.serve_request(&session, &updated(code), 6), Err(StorageError::CodeAlreadyConsumed(_))));
        assert_eq!(fx.site.grant(code).unwrap().state, GrantState::Consumed);
    }

    #[test]
    fn session_is_user_bound() {
        let mut fx = fixture();
        let code = "courtToCloudNVR000000000000000003";
        let env = forward(&mut fx, code);
        fx.site.receive_forwarded_request(&env, 0).unwrap();
        let other = generate_keypair("police1", b"p").unwrap();
        fx.site.register_user("police1", other.public(), Digest256::of(b"p"));
        let s = fx.site.authenticate("police1", &Digest256::of(b"p"), "phone").unwrap();
        assert!(matches!(fx.site.serve_request(&s, &updated(code), 0), Err(StorageError::Unauthorized)));
        assert!(matches!(fx.site.serve_request(&SiteSession(Digest256::ZERO), &updated(code), 0), Err(StorageError::Unauthorized)));
    }

    #[test]
    fn missing_footage_keeps_code() {
        let mut fx = fixture();
        let code = "courtToCloudNVR000000000000000004";
        let mut req = updated(code);
        req.request.range = TimeRange::new("11:00".parse().unwrap(), "11:30".parse().unwrap()).unwrap();
        let env = seal(&fx.sac, &fx.site.public(), &req.to_json(), &mut fx.rng).unwrap();
        fx.site.receive_forwarded_request(&env, 0).unwrap();
        let s = fx.site.authenticate("court1", &fx.cred, "tablet").unwrap();
        assert!(matches!(fx.site.serve_request(&s, &req, 0), Err(StorageError::SegmentNotFound { .. })));
        assert_eq!(fx.site.grant(code).unwrap().state, GrantState::Pending);
    }

    #[test]
    fn expiry() {
        let mut fx = fixture();
        assert_eq!(fx.site.expire_grants(0), 0);
        let env = forward(&mut fx, "courtToCloudNVR000000000000000005");
        fx.site.receive_forwarded_request(&env, 100).unwrap();
        let env = forward(&mut fx, "courtToCloudNVR000000000000000006");
        fx.site.receive_forwarded_request(&env, 100).unwrap();
        let s = fx.site.authenticate("court1", &fx.cred, "t").unwrap();
        fx.site.serve_request(&s, &updated("courtToCloudNVR000000000000000006"), 101).unwrap();

        assert_eq!(fx.site.expire_grants(100 + DEFAULT_TTL), 0);
        assert_eq!(fx.site.expire_grants(101 + DEFAULT_TTL), 1);
        assert_eq!(fx.site.grant("courtToCloudNVR000000000000000005").unwrap().state, GrantState::Expired);
        assert_eq!(fx.site.grant("courtToCloudNVR000000000000000006").unwrap().state, GrantState::Consumed);
        assert!(matches!(fx.site.serve_request(&s, &updated("courtToCloudNVR000000000000000005"), 0), Err(StorageError::NoMatchingGrant)));
    }
}
