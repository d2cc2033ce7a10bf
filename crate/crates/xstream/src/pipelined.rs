//! Pipelined engine: one thread per processor, hand-off through depth-one
//! channels. Produces the same transcript as the lockstep [`Ring`](crate::ring::Ring).

use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::thread::{self, JoinHandle};

use crate::model::{Bundle, StreamItem};
use crate::processor::{Processor, ProcessorError};
use crate::ring::{build_processors, log_tick, IoProcessor, RingConfig, RingError, Transcript};

type Msg = Result<Bundle, (u64, ProcessorError)>;

/// A running pipelined ring. Validation, taps and metrics are lockstep-only.
pub struct PipelinedRing {
    cfg: RingConfig,
    io: IoProcessor,
    head_tx: Option<SyncSender<Msg>>,
    tail_rx: Receiver<Msg>,
    workers: Vec<JoinHandle<Processor>>,
    tick: u64,
    transcript: Transcript,
    failed: Option<u64>,
}

fn worker(mut proc_: Processor, rx: Receiver<Msg>, tx: SyncSender<Msg>) -> Processor {
    let mut tick = 0u64;
    while let Ok(msg) = rx.recv() {
        let out = msg.and_then(|b| proc_.process(b).map_err(|e| (tick, e)));
        tick += 1;
        if tx.send(out).is_err() {
            break;
        }
    }
    proc_
}

impl PipelinedRing {
    pub fn new(cfg: RingConfig) -> Result<Self, RingError> {
        cfg.check()?;
        let mut cfg_nv = cfg;
        cfg_nv.validate = false;
        let procs = build_processors(&cfg_nv);
        let (head_tx, mut rx) = sync_channel::<Msg>(1);
        let mut workers = Vec::with_capacity(cfg.p);
        for (i, p) in procs.into_iter().enumerate() {
            let (tx, next_rx) = sync_channel::<Msg>(1);
            if i + 1 < cfg.p {
                // Lockstep hands an empty bundle to every non-head processor on tick 0.
                tx.send(Ok(Bundle::empty(cfg.k))).expect("receiver alive");
            }
            let in_rx = std::mem::replace(&mut rx, next_rx);
            workers.push(thread::spawn(move || worker(p, in_rx, tx)));
        }
        Ok(PipelinedRing {
            io: IoProcessor::new(cfg.k, cfg.p, cfg.total_capacity() as u64, cfg.auto_age),
            head_tx: Some(head_tx),
            tail_rx: rx,
            workers,
            tick: 0,
            transcript: Transcript::default(),
            failed: None,
            cfg,
        })
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn tick(&mut self, item: Option<StreamItem>) -> Result<(), RingError> {
        if let Some(tick) = self.failed {
            return Err(RingError::SystemFailed { tick });
        }
        let t = self.tick;
        let returning = if t == 0 {
            None
        } else {
            match self.tail_rx.recv().expect("tail worker alive") {
                Ok(b) => Some(b),
                Err((tick, source)) => {
                    self.failed = Some(tick);
                    return Err(RingError::Protocol { tick, source });
                }
            }
        };
        let (head_in, io) = self.io.begin_tick(t, returning, item);
        log_tick(&mut self.transcript, t, &io);
        self.tick += 1;
        if io.failed {
            self.failed = Some(t);
            return Err(RingError::SystemFailed { tick: t });
        }
        self.head_tx.as_ref().expect("running").send(Ok(head_in)).expect("head worker alive");
        Ok(())
    }

    /// Same drain rule as the lockstep engine.
    pub fn drain(&mut self) -> Result<(), RingError> {
        let cap = self.cfg.drain_cap();
        let mut n = 0u64;
        while n < self.cfg.p as u64 || (!self.io.is_quiescent() && n < cap) {
            self.tick(None)?;
            n += 1;
        }
        Ok(())
    }

    pub fn run<I: IntoIterator<Item = StreamItem>>(&mut self, items: I) -> Result<(), RingError> {
        for item in items {
            self.tick(Some(item))?;
        }
        self.drain()
    }

    /// Stop the workers and hand back the transcript and final processor states.
    pub fn shutdown(mut self) -> (Transcript, Vec<Processor>) {
        self.head_tx = None;
        while self.tail_rx.recv().is_ok() {}
        let procs = self.workers.drain(..).map(|h| h.join().expect("worker panicked")).collect();
        (std::mem::take(&mut self.transcript), procs)
    }
}

impl Drop for PipelinedRing {
    fn drop(&mut self) {
        self.head_tx = None;
        while self.tail_rx.recv().is_ok() {}
        for h in self.workers.drain(..) {
            let _ = h.join();
        }
    }
}

/// Run a stream on a fresh pipelined ring.
pub fn run_stream_pipelined<I: IntoIterator<Item = StreamItem>>(
    cfg: RingConfig,
    items: I,
) -> (Transcript, Result<(), RingError>) {
    let mut ring = match PipelinedRing::new(cfg) {
        Ok(r) => r,
        Err(e) => return (Transcript::default(), Err(e)),
    };
    let res = ring.run(items);
    (ring.shutdown().0, res)
}
