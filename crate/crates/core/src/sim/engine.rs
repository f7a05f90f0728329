use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache::{BlockCache, CompartmentId, ReadOutcome, SimFile, Volume};
use crate::codec::{decode_repetition3, Bit, BitMessage, SlotRecord};
use crate::sim::divergence::DivergenceTracker;
use crate::sim::queue::EventQueue;
use crate::sim::trace::{Action, Actor, ChannelMetrics, SimulationTrace, TraceEvent};
use crate::sim::{BackingStore, Coding, ScenarioConfig, SimError};
use crate::timing::SchemeVariant;
use crate::units::{mb_to_blocks, SimTime};

const SENDER: CompartmentId = CompartmentId(1);
const RECEIVER: CompartmentId = CompartmentId(2);
const DISRUPTOR: CompartmentId = CompartmentId(3);

#[derive(Debug, Clone, Copy)]
enum Wake {
    SenderBit(usize),
    /// Sender finished the action of slot `k` and picks its next start.
    SenderDecide(usize),
    ReceiverWarmUp,
    ReceiverProbe(usize),
    DisruptorTick,
}

impl Wake {
    fn actor(self) -> Actor {
        match self {
            Wake::SenderBit(_) | Wake::SenderDecide(_) => Actor::Sender,
            Wake::ReceiverWarmUp | Wake::ReceiverProbe(_) => Actor::Receiver,
            Wake::DisruptorTick => Actor::Disruptor,
        }
    }
}

/// Frame lengths on the integer clock.
struct Frames {
    sender: SimTime,
    receiver: SimTime,
    slot: SimTime,
    overhead: SimTime,
    wait: SimTime,
    threshold: SimTime,
    origin: SimTime,
}

struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    frames: Frames,
    channel: Vec<Bit>,
    cache: BlockCache,
    sender_file: SimFile,
    receiver_file: SimFile,
    disruptor_file: Option<SimFile>,
    queue: EventQueue<Wake>,
    rng: Option<ChaCha8Rng>,
    disk_free: SimTime,
    events: Vec<TraceEvent>,
    slots: Vec<SlotRecord>,
    sender_starts: Vec<SimTime>,
    receiver_starts: Vec<SimTime>,
    divergence: DivergenceTracker,
    sender_done: bool,
    receiver_done: bool,
    end_time: SimTime,
}

/// Runs one scenario to completion.
///
/// The receiver first reads its file once to cache it (one receiver frame);
/// slot 0 starts when that frame ends. In every slot the sender evicts the
/// cache or waits, then the receiver times a re-read of its file and decodes
/// the bit from the read time.
///
/// * Basic scheme: both parties follow a fixed grid of padded slots.
/// * Optimized scheme: no safety frames; the receiver times its slots from its
///   own probes and the sender follows its own reads, re-aligning when the
///   two drift apart by more than the divergence tolerance.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimulationTrace, SimError> {
    cfg.validate()?;
    Engine::new(cfg)?.run()
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self, SimError> {
        let phys = &cfg.physical;
        let timing = &cfg.timing;
        let (sender, receiver) = match cfg.variant {
            SchemeVariant::Basic => (timing.padded_sender_frame(), timing.padded_receiver_frame()),
            SchemeVariant::Optimized => (timing.sender_frame, timing.receiver_frame),
        };
        let sender = SimTime::from_secs_f64(sender);
        let receiver = SimTime::from_secs_f64(receiver);
        let overhead = SimTime::from_secs_f64(cfg.per_bit_overhead);
        let frames = Frames {
            sender,
            receiver,
            slot: sender + receiver + overhead,
            overhead,
            wait: SimTime::from_secs_f64(timing.wait_period),
            threshold: SimTime::from_secs_f64(timing.threshold),
            origin: receiver,
        };

        let mut volume = Volume::unbounded();
        let cache = BlockCache::for_params(phys)?;
        let sender_file = volume.register_blocks(SENDER, cache.capacity())?;
        let receiver_file = volume.register_blocks(RECEIVER, phys.receiver_blocks())?;
        let disruptor_file = match &cfg.disruptor {
            Some(d) => {
                Some(volume.register_blocks(DISRUPTOR, mb_to_blocks(d.file_mb).unwrap_or(0))?)
            }
            None => None,
        };

        let rng = (cfg.jitter_fraction > 0.0).then(|| ChaCha8Rng::seed_from_u64(cfg.rng_seed));

        Ok(Engine {
            cfg,
            frames,
            channel: cfg.channel_message().bits().to_vec(),
            cache,
            sender_file,
            receiver_file,
            disruptor_file,
            queue: EventQueue::new(),
            rng,
            disk_free: SimTime::ZERO,
            events: Vec::new(),
            slots: Vec::new(),
            sender_starts: Vec::new(),
            receiver_starts: Vec::new(),
            divergence: DivergenceTracker::new(SimTime::from_secs_f64(cfg.divergence_tolerance)),
            sender_done: false,
            receiver_done: false,
            end_time: SimTime::ZERO,
        })
    }

    fn schedule(&mut self, at: SimTime, wake: Wake) {
        self.queue.push(at, wake.actor().priority(), wake);
    }

    fn record(
        &mut self,
        time: SimTime,
        actor: Actor,
        action: Action,
        duration: SimTime,
        outcome: Option<ReadOutcome>,
        slot: Option<usize>,
    ) {
        if action == Action::Idle && duration == SimTime::ZERO {
            return;
        }
        self.events.push(TraceEvent {
            time_ns: time,
            actor,
            action,
            duration_ns: duration,
            blocks_touched: outcome.map_or(0, |o| o.blocks()),
            misses: outcome.map_or(0, |o| o.miss_blocks),
            slot,
        });
    }

    /// Reads `file` through the shared cache at `now`; returns the outcome
    /// and the time the read completes.
    fn read(&mut self, file: &SimFile, now: SimTime) -> (ReadOutcome, SimTime) {
        let outcome = self.cache.read_file(file, &self.cfg.physical);
        let io = match self.rng.as_mut() {
            Some(rng) => {
                let j = self.cfg.jitter_fraction;
                let factor: f64 = rng.random_range(1.0 - j..=1.0 + j);
                outcome.duration.scale(factor)
            }
            None => outcome.duration,
        };
        let end = match self.cfg.backing_store {
            BackingStore::SharedQueue if outcome.miss_blocks > 0 => {
                let start = now.max(self.disk_free);
                self.disk_free = start + io;
                start + io
            }
            _ => now + io,
        };
        (outcome, end)
    }

    fn run(mut self) -> Result<SimulationTrace, SimError> {
        self.schedule(SimTime::ZERO, Wake::ReceiverWarmUp);
        if self.channel.is_empty() {
            self.sender_done = true;
        } else {
            self.schedule(self.frames.origin, Wake::SenderBit(0));
        }
        if let Some(d) = self.cfg.disruptor {
            let first = SimTime::from_secs_f64(d.start_offset + d.interval);
            self.schedule(first, Wake::DisruptorTick);
        }

        while let Some((now, wake)) = self.queue.pop() {
            match wake {
                Wake::ReceiverWarmUp => self.receiver_warm_up(now),
                Wake::ReceiverProbe(k) => self.receiver_probe(now, k),
                Wake::SenderBit(k) => self.sender_bit(now, k),
                Wake::SenderDecide(k) => self.sender_decide(now, k),
                Wake::DisruptorTick => self.disruptor_tick(now),
            }
            if self.sender_done && self.receiver_done {
                break;
            }
        }
        self.finish()
    }

    fn receiver_warm_up(&mut self, now: SimTime) {
        let file = self.receiver_file.clone();
        let (outcome, end) = self.read(&file, now);
        self.record(
            now,
            Actor::Receiver,
            Action::WarmUp,
            end - now,
            Some(outcome),
            None,
        );
        let first_slot = self.frames.origin.max(end);
        self.receiver_starts.push(first_slot);
        if self.channel.is_empty() {
            self.record(
                end,
                Actor::Receiver,
                Action::Idle,
                first_slot - end,
                None,
                None,
            );
            self.end_time = first_slot;
            self.receiver_done = true;
            return;
        }
        let probe_at = first_slot + self.frames.sender;
        self.record(
            end,
            Actor::Receiver,
            Action::Idle,
            probe_at - end,
            None,
            Some(0),
        );
        self.schedule(probe_at, Wake::ReceiverProbe(0));
    }

    fn receiver_probe(&mut self, now: SimTime, k: usize) {
        let file = self.receiver_file.clone();
        let (outcome, end) = self.read(&file, now);
        let measured = end - now;
        self.slots.push(SlotRecord::new(
            k,
            self.channel[k],
            measured,
            self.frames.threshold,
        ));
        self.record(
            now,
            Actor::Receiver,
            Action::Probe,
            measured,
            Some(outcome),
            Some(k),
        );

        let next_slot = match self.cfg.variant {
            SchemeVariant::Basic => self.grid(k + 1),
            SchemeVariant::Optimized => now + self.frames.receiver + self.frames.overhead,
        }
        .max(end);
        self.receiver_starts.push(next_slot);

        if k + 1 == self.channel.len() {
            self.record(
                end,
                Actor::Receiver,
                Action::Idle,
                next_slot - end,
                None,
                Some(k),
            );
            self.end_time = next_slot;
            self.receiver_done = true;
        } else {
            let probe_at = next_slot + self.frames.sender;
            self.record(
                end,
                Actor::Receiver,
                Action::Idle,
                probe_at - end,
                None,
                Some(k + 1),
            );
            self.schedule(probe_at, Wake::ReceiverProbe(k + 1));
        }
    }

    fn sender_bit(&mut self, now: SimTime, k: usize) {
        self.sender_starts.push(now);
        let end = match self.channel[k] {
            Bit::One => {
                let file = self.sender_file.clone();
                let (outcome, end) = self.read(&file, now);
                self.record(
                    now,
                    Actor::Sender,
                    Action::Evict,
                    end - now,
                    Some(outcome),
                    Some(k),
                );
                end
            }
            Bit::Zero => {
                let end = now + self.frames.wait;
                self.record(
                    now,
                    Actor::Sender,
                    Action::Wait,
                    self.frames.wait,
                    None,
                    Some(k),
                );
                end
            }
        };
        self.schedule(end, Wake::SenderDecide(k));
    }

    fn sender_decide(&mut self, now: SimTime, k: usize) {
        let start = self.sender_starts[k];
        if k + 1 == self.channel.len() {
            self.sender_done = true;
            return;
        }
        let next = match self.cfg.variant {
            SchemeVariant::Basic => {
                let next = self.grid(k + 1).max(now);
                self.divergence.observe(next, self.grid(k + 1));
                next
            }
            SchemeVariant::Optimized => {
                let nominal = match self.channel[k] {
                    Bit::One => now + self.frames.receiver + self.frames.overhead,
                    Bit::Zero => start + self.frames.slot,
                }
                .max(now);
                // The receiver's next slot start is known once its current probe
                // has run; until then assume it keeps its nominal pace.
                let receiver = match self.receiver_starts.get(k + 1) {
                    Some(&t) => t,
                    None => self.receiver_starts[k] + self.frames.slot,
                };
                self.divergence.align(k + 1, nominal, receiver, now)
            }
        };
        self.record(
            now,
            Actor::Sender,
            Action::Idle,
            next - now,
            None,
            Some(k + 1),
        );
        self.schedule(next, Wake::SenderBit(k + 1));
    }

    fn disruptor_tick(&mut self, now: SimTime) {
        let (Some(file), Some(d)) = (self.disruptor_file.clone(), self.cfg.disruptor) else {
            return;
        };
        let (outcome, end) = self.read(&file, now);
        self.record(
            now,
            Actor::Disruptor,
            Action::Tick,
            end - now,
            Some(outcome),
            None,
        );
        // Ticks that would land inside the current read are skipped, keeping the phase.
        let interval = SimTime::from_secs_f64(d.interval).max(SimTime(1));
        let mut next = now + interval;
        if next < end {
            let behind = (end - next).as_nanos().div_ceil(interval.as_nanos());
            next += interval * behind;
        }
        self.schedule(next, Wake::DisruptorTick);
    }

    fn grid(&self, k: usize) -> SimTime {
        self.frames.origin + self.frames.slot * k as u64
    }

    fn finish(mut self) -> Result<SimulationTrace, SimError> {
        // Stable sort keeps per-actor order for equal (time, actor).
        self.events.sort_by_key(|e| (e.time_ns, e.actor));

        let received: BitMessage = self.slots.iter().map(|s| s.decoded_bit).collect();
        let decoded = match self.cfg.coding {
            Coding::None => received,
            Coding::Repetition3 => decode_repetition3(&received)?,
        };
        let message = &self.cfg.message;
        let bit_errors = decoded.hamming_distance(message);
        let total = self.end_time.as_secs_f64();
        let metrics = ChannelMetrics {
            total_time: total,
            transmission_start: self.frames.origin.as_secs_f64(),
            throughput: if total > 0.0 {
                decoded.len() as f64 / total
            } else {
                0.0
            },
            bit_errors,
            ber: if message.is_empty() {
                0.0
            } else {
                bit_errors as f64 / message.len() as f64
            },
            slot_errors: self.slots.iter().filter(|s| s.is_error()).count(),
            channel_bits: self.channel.len(),
            divergence_max: self.divergence.max_divergence().as_secs_f64(),
            adjustments: self.divergence.adjusted_bits().len(),
        };
        Ok(SimulationTrace {
            config: self.cfg.clone(),
            events: self.events,
            slots: self.slots,
            decoded_message: decoded,
            metrics,
            total_time_ns: self.end_time,
            transmission_start_ns: self.frames.origin,
        })
    }
}
