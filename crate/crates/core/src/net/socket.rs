use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::frame::{read_frame, write_frame};
use super::{DelayModel, DelaySampler, Envelope, NetError, Transport, TransportStats};
use crate::model::AgentId;

#[derive(Default)]
struct InboxState {
    /// Keyed by (deliver time, arrival order).
    heap: BinaryHeap<Reverse<(u64, u64, Held)>>,
    seq: u64,
    errors: Vec<String>,
}

struct Held(Envelope);

impl PartialEq for Held {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}
impl Eq for Held {}
impl PartialOrd for Held {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Held {
    fn cmp(&self, _: &Self) -> std::cmp::Ordering {
        std::cmp::Ordering::Equal
    }
}

#[derive(Default)]
struct Inbox {
    state: Mutex<InboxState>,
    cv: Condvar,
}

/// One agent's endpoint on a loopback TCP mesh. Incoming frames are held
/// until their stamped delivery time.
pub struct SocketTransport {
    me: AgentId,
    n: usize,
    writers: Vec<Option<TcpStream>>,
    inbox: Arc<Inbox>,
    delays: DelaySampler,
    /// Last stamped delivery time per recipient; stamps never decrease, so
    /// each channel stays FIFO.
    last_deliver: Vec<u64>,
    epoch: Instant,
    stats: TransportStats,
}

fn io_err(e: std::io::Error) -> NetError {
    NetError::Io(e.to_string())
}

/// Fully connected mesh of `n` endpoints on 127.0.0.1, one listener each.
pub fn socket_mesh(n: usize, delay: &DelayModel) -> Result<Vec<SocketTransport>, NetError> {
    let epoch = Instant::now();
    let listeners: Vec<TcpListener> =
        (0..n).map(|_| TcpListener::bind("127.0.0.1:0")).collect::<Result<_, _>>().map_err(io_err)?;
    let addrs: Vec<_> = listeners.iter().map(|l| l.local_addr()).collect::<Result<_, _>>().map_err(io_err)?;
    let inboxes: Vec<Arc<Inbox>> = (0..n).map(|_| Arc::new(Inbox::default())).collect();

    let acceptors: Vec<_> = listeners
        .into_iter()
        .zip(&inboxes)
        .map(|(listener, inbox)| {
            let inbox = Arc::clone(inbox);
            thread::spawn(move || -> std::io::Result<()> {
                for _ in 1..n {
                    let (stream, _) = listener.accept()?;
                    let inbox = Arc::clone(&inbox);
                    thread::spawn(move || reader_loop(stream, inbox));
                }
                Ok(())
            })
        })
        .collect();

    let mut endpoints = Vec::with_capacity(n);
    for (i, inbox) in inboxes.iter().enumerate() {
        let mut writers = Vec::with_capacity(n);
        for (j, addr) in addrs.iter().enumerate() {
            if i == j {
                writers.push(None);
                continue;
            }
            let s = TcpStream::connect(addr).map_err(io_err)?;
            s.set_nodelay(true).map_err(io_err)?;
            writers.push(Some(s));
        }
        endpoints.push(SocketTransport {
            me: AgentId(i),
            n,
            writers,
            inbox: Arc::clone(inbox),
            delays: DelaySampler::with_stream(delay, i as u64 + 1)?,
            last_deliver: vec![0; n],
            epoch,
            stats: TransportStats::new(n),
        });
    }
    for a in acceptors {
        a.join().map_err(|_| NetError::Io("acceptor thread panicked".into()))?.map_err(io_err)?;
    }
    Ok(endpoints)
}

fn reader_loop(mut stream: TcpStream, inbox: Arc<Inbox>) {
    loop {
        match read_frame(&mut stream) {
            Ok(Some(env)) => {
                let mut st = inbox.state.lock().unwrap();
                let seq = st.seq;
                st.seq += 1;
                st.heap.push(Reverse((env.deliver_us, seq, Held(env))));
                inbox.cv.notify_all();
            }
            Ok(None) => return,
            Err(e) => {
                // Framing errors drop the connection.
                inbox.state.lock().unwrap().errors.push(e.to_string());
                let _ = stream.shutdown(Shutdown::Both);
                return;
            }
        }
    }
}

impl SocketTransport {
    /// Framing errors seen by this endpoint's readers.
    pub fn errors(&self) -> Vec<String> {
        self.inbox.state.lock().unwrap().errors.clone()
    }

    pub fn close(&mut self) {
        for w in self.writers.iter_mut() {
            if let Some(s) = w.take() {
                let _ = s.shutdown(Shutdown::Write);
            }
        }
    }
}

impl Drop for SocketTransport {
    fn drop(&mut self) {
        self.close();
    }
}

impl Transport for SocketTransport {
    fn me(&self) -> AgentId {
        self.me
    }

    fn now_us(&self) -> u64 {
        self.epoch.elapsed().as_micros() as u64
    }

    fn send(&mut self, env: Envelope) -> Result<(), NetError> {
        if self.writers.iter().all(Option::is_none) && self.n > 1 {
            return Err(NetError::Closed);
        }
        let now = self.now_us();
        for to in env.recipients(self.n) {
            let Some(w) = self.writers[to.index()].as_mut() else { continue };
            let mut copy = env.clone();
            copy.enqueue_us = now;
            copy.deliver_us = (now + self.delays.sample()).max(self.last_deliver[to.index()]);
            self.last_deliver[to.index()] = copy.deliver_us;
            // A peer that already shut down is not an error.
            match write_frame(w, &copy) {
                Ok(()) => self.stats.record_send(self.me, copy.kind()),
                Err(_) => self.writers[to.index()] = None,
            }
        }
        Ok(())
    }

    fn recv_timeout(&mut self, timeout: Duration) -> Result<Option<Envelope>, NetError> {
        let deadline = self.now_us() + timeout.as_micros() as u64;
        let mut st = self.inbox.state.lock().unwrap();
        loop {
            let now = self.now_us();
            let wake = match st.heap.peek() {
                Some(Reverse((due, _, _))) if *due <= now => {
                    let Reverse((_, _, Held(env))) = st.heap.pop().unwrap();
                    self.stats.record_delivery(self.me);
                    return Ok(Some(env));
                }
                Some(Reverse((due, _, _))) => (*due).min(deadline),
                None => deadline,
            };
            if now >= deadline {
                return Ok(None);
            }
            st = self.inbox.cv.wait_timeout(st, Duration::from_micros(wake.saturating_sub(now).max(1))).unwrap().0;
        }
    }

    fn stats(&self) -> &TransportStats {
        &self.stats
    }
}
