//! Linearizable store over a [`Platform`].
//!
//! Mutations pass through a single commit point: decide against the current
//! state, append the event to the sink, then apply it. Readers hold the state
//! lock only while reading, and the writer only takes it exclusively for the
//! in-memory apply, so reads are not blocked while an append is syncing.

use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use crate::blob::{BlobStore, FsBlobStore, MemBlobStore};
use crate::chain::{ChainOutcome, ImageOrigin, ImageRecord};
use crate::clock::{Clock, SystemClock};
use crate::error::{Error, Result};
use crate::event::{Command, Decision, EventRecord, Outcome};
use crate::ids::{ChainId, ImageId, StoryId, WorkerId};
use crate::log::{open_log_file, EventSink};
use crate::platform::{token_digest, Platform, WorkerProfile};
use crate::story::StoryText;
use crate::voting::VoteRecord;

pub const LOG_FILE_NAME: &str = "events.log";
pub const BLOB_DIR_NAME: &str = "blobs";

struct Committer {
    sink: Box<dyn EventSink>,
    /// Set once a sink write or apply has failed; the log may no longer match memory.
    poisoned: bool,
}

pub struct Store {
    state: RwLock<Platform>,
    committer: Mutex<Committer>,
    blobs: Arc<dyn BlobStore>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("last_seq", &self.read(|p| p.last_seq()))
            .finish_non_exhaustive()
    }
}

impl Store {
    pub fn new(platform: Platform, sink: Box<dyn EventSink>, blobs: Arc<dyn BlobStore>, clock: Arc<dyn Clock>) -> Self {
        Self {
            state: RwLock::new(platform),
            committer: Mutex::new(Committer { sink, poisoned: false }),
            blobs,
            clock,
        }
    }

    /// Memory-only store; events are kept in a `Vec`.
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Self::new(
            Platform::new(),
            Box::new(Vec::<EventRecord>::new()),
            Arc::new(MemBlobStore::default()),
            clock,
        )
    }

    /// Opens (or initialises) a data directory, replaying its event log.
    pub fn open_dir(dir: &Path, clock: Arc<dyn Clock>) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let (records, writer) = open_log_file(&dir.join(LOG_FILE_NAME))?;
        let platform = replay_records(&records)?;
        let blobs = FsBlobStore::open(dir.join(BLOB_DIR_NAME))?;
        Ok(Self::new(platform, Box::new(writer), Arc::new(blobs), clock))
    }

    pub fn open_dir_system_clock(dir: &Path) -> Result<Self> {
        Self::open_dir(dir, Arc::new(SystemClock))
    }

    pub fn read<R>(&self, f: impl FnOnce(&Platform) -> R) -> R {
        f(&self.state.read().expect("state lock"))
    }

    pub fn snapshot(&self) -> Platform {
        self.read(Platform::clone)
    }

    pub fn blob(&self, id: &ImageId) -> Result<Option<Vec<u8>>> {
        self.blobs.get(id)
    }

    /// Runs one command through the commit point.
    pub fn execute(&self, cmd: Command) -> Result<Outcome> {
        let mut committer = self.committer.lock().expect("commit lock");
        if committer.poisoned {
            return Err(Error::Io(std::io::Error::other(
                "store is read-only after a failed commit",
            )));
        }
        let (decision, next_seq) = self.read(|p| (p.decide(&cmd), p.last_seq() + 1));
        let kind = match decision? {
            Decision::Unchanged(outcome) => return Ok(outcome),
            Decision::Append(kind) => kind,
        };
        let rec = EventRecord {
            seq: next_seq,
            at: self.clock.now(),
            kind,
        };
        if let Err(e) = committer.sink.append(&rec) {
            committer.poisoned = true;
            return Err(e);
        }
        let applied = self.state.write().expect("state lock").apply(&rec);
        if applied.is_err() {
            committer.poisoned = true;
        }
        applied
    }

    pub fn register_worker(&self, display_name: &str, token: &str) -> Result<WorkerProfile> {
        match self.execute(Command::RegisterWorker {
            display_name: display_name.to_owned(),
            token_digest: token_digest(token),
        })? {
            Outcome::Worker(w) => Ok(w),
            other => unreachable!("register produced {other:?}"),
        }
    }

    pub fn authenticate(&self, token: &str) -> Option<WorkerId> {
        let digest = token_digest(token);
        self.read(|p| p.worker_by_token_digest(&digest).map(|w| w.worker_id))
    }

    /// Adds an uploaded image. Returns the record and whether it is new; an
    /// identical blob already in the pool returns the original record.
    pub fn add_image(&self, blob: &[u8], description: &str, worker: WorkerId) -> Result<(ImageRecord, bool)> {
        self.add_image_with_origin(blob, description, worker, ImageOrigin::WorkerUpload)
    }

    /// Adds a starting-pool image.
    pub fn seed_base_image(&self, blob: &[u8], description: &str, worker: WorkerId) -> Result<(ImageRecord, bool)> {
        self.add_image_with_origin(blob, description, worker, ImageOrigin::BasePool)
    }

    pub fn add_image_with_origin(
        &self,
        blob: &[u8],
        description: &str,
        worker: WorkerId,
        origin: ImageOrigin,
    ) -> Result<(ImageRecord, bool)> {
        if blob.is_empty() {
            return Err(Error::EmptyBlob);
        }
        if description.trim().is_empty() {
            return Err(Error::EmptyDescription);
        }
        if self.read(|p| p.worker(worker).is_none()) {
            return Err(Error::UnknownWorker(worker));
        }
        let image_id = ImageId::of_bytes(blob);
        // blob first: a logged image always has its bytes on disk
        self.blobs.put(&image_id, blob)?;
        match self.execute(Command::AddImage {
            image_id,
            description: description.to_owned(),
            worker,
            origin,
        })? {
            Outcome::Image { image, created } => Ok((image, created)),
            other => unreachable!("add_image produced {other:?}"),
        }
    }

    fn chain_command(&self, cmd: Command) -> Result<ChainOutcome> {
        match self.execute(cmd)? {
            Outcome::Chain(c) => Ok(c),
            other => unreachable!("chain command produced {other:?}"),
        }
    }

    pub fn start_chain(&self, base: &ImageId, worker: WorkerId) -> Result<ChainOutcome> {
        self.chain_command(Command::StartChain {
            base: base.clone(),
            worker,
        })
    }

    pub fn extend_chain(&self, parent: &ChainId, appended: &[ImageId], worker: WorkerId) -> Result<ChainOutcome> {
        self.chain_command(Command::ExtendChain {
            parent: parent.clone(),
            appended: appended.to_vec(),
            worker,
        })
    }

    pub fn branch_chain(
        &self,
        parent: &ChainId,
        prefix_len: usize,
        appended: &[ImageId],
        worker: WorkerId,
    ) -> Result<ChainOutcome> {
        self.chain_command(Command::BranchChain {
            parent: parent.clone(),
            prefix_len,
            appended: appended.to_vec(),
            worker,
        })
    }

    pub fn merge_chains(&self, first: &ChainId, second: &ChainId, worker: WorkerId) -> Result<ChainOutcome> {
        self.chain_command(Command::MergeChains {
            first: first.clone(),
            second: second.clone(),
            worker,
        })
    }

    pub fn submit_story(
        &self,
        chain: &ChainId,
        worker: WorkerId,
        body: &str,
        derived_from: Option<StoryId>,
    ) -> Result<StoryText> {
        match self.execute(Command::SubmitStory {
            chain: chain.clone(),
            worker,
            body: body.to_owned(),
            derived_from,
        })? {
            Outcome::Story(s) => Ok(s),
            other => unreachable!("submit_story produced {other:?}"),
        }
    }

    pub fn vote_story(&self, story: StoryId, worker: WorkerId) -> Result<VoteRecord> {
        match self.execute(Command::CastVote { story, worker })? {
            Outcome::Vote(v) => Ok(v),
            other => unreachable!("vote_story produced {other:?}"),
        }
    }
}

/// Replays records, reporting failures as log corruption at the offending line
/// (line 1 is the header, so record `n` sits on line `n + 1`).
pub fn replay_records(records: &[EventRecord]) -> Result<Platform> {
    let mut platform = Platform::new();
    for (i, rec) in records.iter().enumerate() {
        platform
            .apply(rec)
            .map_err(|e| Error::corrupt(i + 2, format!("replay failed: {e}")))?;
    }
    Ok(platform)
}
