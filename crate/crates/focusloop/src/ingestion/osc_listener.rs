//! UDP listener for Muse-style OSC band-power streams.

use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use focusloop_core::osc::{decode_muse, MuseAssembler, MuseEvent};
use focusloop_core::ChannelSet;

use super::queue::BoundedQueue;
use super::{LabeledSample, QueueSource};
use crate::error::Result;

pub const DEFAULT_OSC_PORT: u16 = 7000;

#[derive(Debug, Default)]
pub struct OscCounters {
    pub datagrams: AtomicU64,
    pub ignored: AtomicU64,
    pub malformed: AtomicU64,
}

/// Owns the receive thread; dropping it stops the thread and closes the
/// queue.
#[derive(Debug)]
pub struct OscListener {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    counters: Arc<OscCounters>,
    queue: BoundedQueue<LabeledSample>,
    handle: Option<JoinHandle<()>>,
}

impl OscListener {
    /// Binds `0.0.0.0:port` (port 0 picks a free one).
    pub fn bind(port: u16, channels: ChannelSet, queue: BoundedQueue<LabeledSample>) -> Result<Self> {
        let sock = UdpSocket::bind(("0.0.0.0", port))?;
        sock.set_read_timeout(Some(Duration::from_millis(100)))?;
        let addr = sock.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let counters = Arc::new(OscCounters::default());
        let handle = {
            let (stop, counters, queue) = (Arc::clone(&stop), Arc::clone(&counters), queue.clone());
            std::thread::spawn(move || receive_loop(sock, channels, queue, stop, counters))
        };
        log::info!("listening for OSC on {}", addr);
        Ok(Self {
            addr,
            stop,
            counters,
            queue,
            handle: Some(handle),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn counters(&self) -> &OscCounters {
        &self.counters
    }

    pub fn source(&self, channels: ChannelSet) -> QueueSource {
        QueueSource::new(channels, self.queue.clone())
    }
}

impl Drop for OscListener {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
        self.queue.close();
    }
}

fn receive_loop(
    sock: UdpSocket,
    channels: ChannelSet,
    queue: BoundedQueue<LabeledSample>,
    stop: Arc<AtomicBool>,
    counters: Arc<OscCounters>,
) {
    let start = Instant::now();
    let mut asm = MuseAssembler::new(channels);
    let mut last_ts: Option<u64> = None;
    let mut buf = [0u8; 2048];
    while !stop.load(Ordering::Relaxed) {
        let n = match sock.recv_from(&mut buf) {
            Ok((n, _)) => n,
            Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {
                continue
            }
            Err(e) => {
                log::error!("osc socket: {}", e);
                break;
            }
        };
        counters.datagrams.fetch_add(1, Ordering::Relaxed);
        match decode_muse(&buf[..n]) {
            Ok(MuseEvent::Band(reading)) => {
                // receive clock, forced strictly increasing
                let now = start.elapsed().as_millis() as u64;
                let ts = last_ts.map_or(now, |t| now.max(t + 1));
                if let Some(sample) = asm.push(reading, ts) {
                    last_ts = Some(ts);
                    queue.push(LabeledSample::unlabeled(sample));
                }
            }
            Ok(MuseEvent::Ignored) => {
                counters.ignored.fetch_add(1, Ordering::Relaxed);
            }
            Err(e) => {
                counters.malformed.fetch_add(1, Ordering::Relaxed);
                log::warn!("dropping malformed datagram: {}", e);
            }
        }
    }
}
