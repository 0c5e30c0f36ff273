//! Shared hit-counter region.
//!
//! The region is a memory-mapped file under /dev/shm (temp dir as a
//! fallback) holding a short self-describing header followed by one 8-bit
//! saturating counter per planned block. The header embeds the serialized
//! layout, so a target process can find its own window knowing nothing but
//! the region name and its binary id, both passed in environment
//! variables.
//!
//! File format:
//!   bytes 0..8    magic `COVREGv1`
//!   bytes 8..16   little-endian u64: layout text length L
//!   bytes 16..16+L  layout document (see blockplan layout format)
//!   counters start at the next multiple of 64 after 16+L

use std::fs::OpenOptions;
use std::os::fd::AsRawFd;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU8, Ordering};
use std::time::Instant;

use blockplan::{parse_layout, render_layout, GlobalLayout};

use crate::error::CovError;

pub const ENV_REGION: &str = "COVRT_REGION";
pub const ENV_BINARY: &str = "COVRT_BINARY";

const MAGIC: &[u8; 8] = b"COVREGv1";
const COUNTER_ALIGN: usize = 64;

fn region_dir() -> PathBuf {
    let shm = Path::new("/dev/shm");
    if shm.is_dir() {
        shm.to_path_buf()
    } else {
        std::env::temp_dir()
    }
}

pub fn region_path(name: &str) -> PathBuf {
    region_dir().join(name)
}

fn fresh_region_name() -> String {
    use std::sync::atomic::AtomicU64;
    static SEQ: AtomicU64 = AtomicU64::new(0);
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.subsec_nanos() as u64 ^ d.as_secs())
        .unwrap_or(0);
    let seq = SEQ.fetch_add(1, Ordering::Relaxed);
    format!("covrt-{:08x}{:04x}-{}", nanos as u32, seq & 0xffff, std::process::id())
}

struct Mapping {
    ptr: *mut u8,
    len: usize,
}

unsafe impl Send for Mapping {}
unsafe impl Sync for Mapping {}

impl Mapping {
    fn map(fd: i32, len: usize) -> Result<Mapping, CovError> {
        let ptr = unsafe {
            libc::mmap(
                std::ptr::null_mut(),
                len,
                libc::PROT_READ | libc::PROT_WRITE,
                libc::MAP_SHARED,
                fd,
                0,
            )
        };
        if ptr == libc::MAP_FAILED {
            return Err(std::io::Error::last_os_error().into());
        }
        Ok(Mapping { ptr: ptr as *mut u8, len })
    }
}

impl Drop for Mapping {
    fn drop(&mut self) {
        unsafe {
            libc::munmap(self.ptr as *mut libc::c_void, self.len);
        }
    }
}

/// One process's handle on the shared counter region.
pub struct CoverageRegion {
    layout: GlobalLayout,
    name: String,
    path: PathBuf,
    map: Mapping,
    counters_offset: usize,
    owner: bool,
}

/// Window of one binary inside a region: counter slots
/// [offset, offset+length) of the global array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowView {
    pub offset: u64,
    pub length: u64,
}

/// Point-in-time copy of all counters.
#[derive(Debug, Clone)]
pub struct CoverageSnapshot {
    pub counters: Vec<u8>,
    pub timestamp: Instant,
}

impl CoverageRegion {
    /// Create a fresh zero-filled region for `layout`.
    pub fn create(layout: &GlobalLayout) -> Result<CoverageRegion, CovError> {
        let name = fresh_region_name();
        let path = region_path(&name);
        let header_text = render_layout(layout);
        let counters_offset = (16 + header_text.len()).div_ceil(COUNTER_ALIGN) * COUNTER_ALIGN;
        let total = counters_offset + layout.total_length as usize;
        let file = OpenOptions::new()
            .read(true)
            .write(true)
            .create_new(true)
            .open(&path)?;
        file.set_len(total as u64)?;
        let map = Mapping::map(file.as_raw_fd(), total)?;
        unsafe {
            std::ptr::copy_nonoverlapping(MAGIC.as_ptr(), map.ptr, 8);
            let len_le = (header_text.len() as u64).to_le_bytes();
            std::ptr::copy_nonoverlapping(len_le.as_ptr(), map.ptr.add(8), 8);
            std::ptr::copy_nonoverlapping(header_text.as_ptr(), map.ptr.add(16), header_text.len());
        }
        Ok(CoverageRegion {
            layout: layout.clone(),
            name,
            path,
            map,
            counters_offset,
            owner: true,
        })
    }

    /// Attach to an existing region by name (the target-process side).
    pub fn open(name: &str) -> Result<CoverageRegion, CovError> {
        let path = region_path(name);
        let file = OpenOptions::new().read(true).write(true).open(&path)?;
        let file_len = file.metadata()?.len() as usize;
        if file_len < 16 {
            return Err(CovError::HeaderFormat("file shorter than fixed header".into()));
        }
        let map = Mapping::map(file.as_raw_fd(), file_len)?;
        let header = unsafe { std::slice::from_raw_parts(map.ptr, 16) };
        if &header[0..8] != MAGIC {
            return Err(CovError::HeaderFormat("bad magic".into()));
        }
        let text_len = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        if 16 + text_len > file_len {
            return Err(CovError::HeaderFormat("layout text extends past file end".into()));
        }
        let text = unsafe { std::slice::from_raw_parts(map.ptr.add(16), text_len) };
        let text = std::str::from_utf8(text)
            .map_err(|_| CovError::HeaderFormat("layout text is not UTF-8".into()))?;
        let layout = parse_layout(text)?;
        let counters_offset = (16 + text_len).div_ceil(COUNTER_ALIGN) * COUNTER_ALIGN;
        if counters_offset + layout.total_length as usize > file_len {
            return Err(CovError::HeaderFormat("counter array extends past file end".into()));
        }
        Ok(CoverageRegion {
            layout,
            name: name.to_string(),
            path,
            map,
            counters_offset,
            owner: false,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layout(&self) -> &GlobalLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.layout.total_length as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn counters(&self) -> &[AtomicU8] {
        unsafe {
            std::slice::from_raw_parts(
                self.map.ptr.add(self.counters_offset) as *const AtomicU8,
                self.len(),
            )
        }
    }

    /// Window of `binary_id` within this region.
    pub fn attach(&self, binary_id: &str) -> Result<WindowView, CovError> {
        let entry = self
            .layout
            .window(binary_id)
            .ok_or_else(|| CovError::UnknownBinary(binary_id.to_string()))?;
        Ok(WindowView { offset: entry.offset, length: entry.length })
    }

    /// Increment the counter at `view.offset + local`, saturating at 255.
    ///
    /// Racing increments may be lost; saturation is never violated. Out of
    /// range indices are rejected in debug builds and dropped in release.
    #[inline]
    pub fn record_hit(&self, view: WindowView, local: u64) {
        debug_assert!(local < view.length, "counter index {local} outside window");
        if local >= view.length {
            return;
        }
        let c = &self.counters()[(view.offset + local) as usize];
        let v = c.load(Ordering::Relaxed);
        if v < 255 {
            c.store(v + 1, Ordering::Relaxed);
        }
    }

    pub fn snapshot(&self) -> CoverageSnapshot {
        let counters = self.counters().iter().map(|c| c.load(Ordering::Relaxed)).collect();
        CoverageSnapshot { counters, timestamp: Instant::now() }
    }

    pub fn reset(&self) {
        for c in self.counters() {
            c.store(0, Ordering::Relaxed);
        }
    }
}

impl Drop for CoverageRegion {
    fn drop(&mut self) {
        if self.owner {
            let _ = std::fs::remove_file(&self.path);
        }
    }
}

/// Region handle plus the window of the binary named in the environment.
/// What an instrumented target process holds for its whole lifetime.
pub struct AttachedWindow {
    region: CoverageRegion,
    view: WindowView,
}

impl AttachedWindow {
    pub fn view(&self) -> WindowView {
        self.view
    }

    #[inline]
    pub fn hit(&self, local: u64) {
        self.region.record_hit(self.view, local);
    }
}

/// Attach to a named region for one binary: `attach_from_env` with the
/// handshake values passed explicitly. In-process harnesses use this to
/// hold several binaries' windows at once.
pub fn attach_to(name: &str, binary: &str) -> Result<AttachedWindow, CovError> {
    let region = CoverageRegion::open(name)?;
    let view = region.attach(binary)?;
    Ok(AttachedWindow { region, view })
}

/// Attach using the `COVRT_REGION` / `COVRT_BINARY` handshake. Returns
/// `Ok(None)` when the variables are absent: the process then runs
/// without coverage collection.
pub fn attach_from_env() -> Result<Option<AttachedWindow>, CovError> {
    let (Ok(name), Ok(binary)) = (std::env::var(ENV_REGION), std::env::var(ENV_BINARY)) else {
        return Ok(None);
    };
    Ok(Some(attach_to(&name, &binary)?))
}
