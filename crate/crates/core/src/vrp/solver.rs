//! Regret-2 construction followed by ruin-and-recreate improvement.
//!
//! The improvement loop cycles through random ruin (a fixed share of all
//! jobs), radial ruin (a seed job plus its nearest neighbours) and route
//! ruin (every job of one tour), re-inserts the removed jobs greedily in
//! shuffled order and keeps the result only if the objective strictly
//! improves.

use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    planned_departure, Activity, ActivityKind, FleetEntry, Job, Matrices, Penalties, Solution, SolverParams,
    TimeWindow, Tour, Unassigned, VehicleType, VrpError,
};
use crate::network::{Mode, TravelMatrix};
use crate::scalar::{cmp, from_u32, Scalar};

const MISSING: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Act {
    job: u32,
    kind: ActivityKind,
}

impl Act {
    #[inline]
    fn side(self) -> usize {
        (self.kind == ActivityKind::Delivery) as usize
    }
}

struct JobInfo<T> {
    size: u32,
    shipment: bool,
    windows: [Option<TimeWindow<T>>; 2],
    durations: [T; 2],
    timed: bool,
}

struct Group<'a, T> {
    vt: &'a VehicleType<T>,
    start_id: &'a str,
    start: usize,
    slot: usize,
    earliest: T,
    first: usize,
    count: usize,
}

#[derive(Debug, Clone)]
struct Route<T> {
    acts: Vec<Act>,
    load: u32,
    timed: bool,
    meters: T,
    seconds: T,
    cost: T,
    penalty: T,
}

impl<T: Scalar> Route<T> {
    fn empty() -> Self {
        Route {
            acts: Vec::new(),
            load: 0,
            timed: false,
            meters: T::zero(),
            seconds: T::zero(),
            cost: T::zero(),
            penalty: T::zero(),
        }
    }

    fn objective(&self) -> T {
        self.cost + self.penalty
    }
}

#[derive(Debug, Clone, Copy)]
struct Eval<T> {
    departure: T,
    end: T,
    meters: T,
    lateness: T,
}

/// Vehicle state part-way along a route.
#[derive(Debug, Clone, Copy)]
struct Cursor<T> {
    departure: T,
    t: T,
    meters: T,
    lateness: T,
    load: i64,
    peak: i64,
    prev: usize,
}

#[derive(Debug, Clone, Copy)]
struct Stamp<T> {
    arrival: T,
    start: T,
    departure: T,
    load_after: u32,
}

#[derive(Debug, Clone, Copy)]
struct Ins<T> {
    delta: T,
    first: usize,
    second: usize,
}

#[derive(Debug, Clone)]
struct State<T> {
    routes: Vec<Route<T>>,
    assigned: Vec<Option<u32>>,
    /// Jobs that could be served but currently are not.
    pending: Vec<usize>,
}

struct Problem<'a, T> {
    jobs: &'a [Job<T>],
    info: Vec<JobInfo<T>>,
    groups: Vec<Group<'a, T>>,
    inst_group: Vec<usize>,
    matrices: Vec<&'a TravelMatrix<T>>,
    /// Per matrix slot, per job: location index of (first, second) activity.
    locs: Vec<Vec<[usize; 2]>>,
    compat: Vec<Vec<bool>>,
    impossible: Vec<Option<String>>,
    pen: Penalties<T>,
}

fn slot_of(modes: &[Mode], mode: Mode) -> usize {
    modes.iter().position(|&m| m == mode).expect("mode registered")
}

impl<'a, T: Scalar> Problem<'a, T> {
    fn new(
        jobs: &'a [Job<T>],
        fleet: &'a [FleetEntry<T>],
        matrices: &'a Matrices<T>,
        pen: Penalties<T>,
    ) -> Result<Self, VrpError> {
        let mut ids = HashSet::new();
        for job in jobs {
            job.validate()?;
            if !ids.insert(job.id()) {
                return Err(VrpError::InvalidJob {
                    id: job.id().to_string(),
                    reason: "duplicate job id".into(),
                });
            }
        }

        let mut modes: Vec<Mode> = Vec::new();
        for entry in fleet {
            if !modes.contains(&entry.vehicle_type.mode) {
                modes.push(entry.vehicle_type.mode);
            }
        }
        let mats: Vec<&TravelMatrix<T>> = modes
            .iter()
            .map(|&m| matrices.require(m))
            .collect::<Result<_, _>>()?;

        let mut groups = Vec::new();
        let mut inst_group = Vec::new();
        for entry in fleet {
            if entry.vehicle_type.capacity == 0 {
                return Err(VrpError::InvalidFleet(format!("{} has zero capacity", entry.vehicle_type.name)));
            }
            let slot = slot_of(&modes, entry.vehicle_type.mode);
            let start = mats[slot]
                .index_of(&entry.start)
                .ok_or_else(|| VrpError::UnknownLocation {
                    location: entry.start.clone(),
                    mode: entry.vehicle_type.mode,
                })?;
            let gi = groups.len();
            groups.push(Group {
                vt: &entry.vehicle_type,
                start_id: &entry.start,
                start,
                slot,
                earliest: entry.earliest_start,
                first: inst_group.len(),
                count: entry.count,
            });
            inst_group.extend(std::iter::repeat_n(gi, entry.count));
        }

        let locs: Vec<Vec<[usize; 2]>> = mats
            .iter()
            .map(|m| {
                jobs.iter()
                    .map(|job| {
                        let find = |id: &str| m.index_of(id).unwrap_or(MISSING);
                        match job {
                            Job::Service(s) => [find(&s.location), MISSING],
                            Job::Shipment(s) => [find(&s.pickup), find(&s.delivery)],
                        }
                    })
                    .collect()
            })
            .collect();

        let info: Vec<JobInfo<T>> = jobs
            .iter()
            .map(|job| match job {
                Job::Service(s) => JobInfo {
                    size: s.size,
                    shipment: false,
                    windows: [s.window, None],
                    durations: [s.duration, T::zero()],
                    timed: s.window.is_some(),
                },
                Job::Shipment(s) => JobInfo {
                    size: s.size,
                    shipment: true,
                    windows: [s.pickup_window, Some(s.delivery_window)],
                    durations: [s.pickup_duration, s.delivery_duration],
                    timed: true,
                },
            })
            .collect();

        let max_cap = fleet.iter().map(|e| e.vehicle_type.capacity).max().unwrap_or(0);
        let mut compat = vec![vec![false; groups.len()]; jobs.len()];
        let mut impossible = vec![None; jobs.len()];
        for (j, job) in jobs.iter().enumerate() {
            for (g, group) in groups.iter().enumerate() {
                let l = locs[group.slot][j];
                let located = l[0] != MISSING && (!info[j].shipment || l[1] != MISSING);
                let mode_ok = match job {
                    Job::Service(s) => s.modes.as_ref().is_none_or(|m| m.contains(&group.vt.mode)),
                    Job::Shipment(_) => true,
                };
                let origin_ok = match job {
                    Job::Service(s) => s.origin.as_deref().is_none_or(|o| o == group.start_id),
                    Job::Shipment(_) => true,
                };
                compat[j][g] = group.count > 0 && located && mode_ok && origin_ok && info[j].size <= group.vt.capacity;
            }
            if !compat[j].iter().any(|&c| c) {
                impossible[j] = Some(if info[j].size > max_cap {
                    format!("size {} exceeds every vehicle capacity", info[j].size)
                } else {
                    "no compatible vehicle".to_string()
                });
            }
        }

        Ok(Problem {
            jobs,
            info,
            groups,
            inst_group,
            matrices: mats,
            locs,
            compat,
            impossible,
            pen,
        })
    }

    #[inline]
    fn loc(&self, g: &Group<T>, a: Act) -> usize {
        self.locs[g.slot][a.job as usize][a.side()]
    }

    #[inline]
    fn window(&self, a: Act) -> Option<TimeWindow<T>> {
        self.info[a.job as usize].windows[a.side()]
    }

    fn departure_for(&self, g: &Group<T>, first: Act) -> T {
        let m = self.matrices[g.slot];
        planned_departure(g.earliest, self.window(first), m.seconds(g.start, self.loc(g, first)))
    }

    fn cursor(&self, g: &Group<T>, departure: T, load: i64) -> Cursor<T> {
        Cursor {
            departure,
            t: departure,
            meters: T::zero(),
            lateness: T::zero(),
            load,
            peak: load,
            prev: g.start,
        }
    }

    /// Moves the vehicle through one more activity. `None` when the load
    /// leaves `[0, capacity]`.
    #[inline]
    fn step(&self, g: &Group<T>, c: &mut Cursor<T>, a: Act) -> Option<Stamp<T>> {
        let m = self.matrices[g.slot];
        let info = &self.info[a.job as usize];
        let here = self.loc(g, a);
        c.meters = c.meters + m.meters(c.prev, here);
        let arrival = c.t + m.seconds(c.prev, here);
        let mut begin = arrival;
        if let Some(w) = info.windows[a.side()] {
            begin = begin.max(w.earliest);
            c.lateness = c.lateness + w.lateness(arrival);
        }
        c.t = begin + info.durations[a.side()];
        c.load += match a.kind {
            ActivityKind::Pickup => info.size as i64,
            _ => -(info.size as i64),
        };
        if c.load > g.vt.capacity as i64 || c.load < 0 {
            return None;
        }
        c.peak = c.peak.max(c.load);
        c.prev = here;
        Some(Stamp {
            arrival,
            start: begin,
            departure: c.t,
            load_after: c.load as u32,
        })
    }

    /// Returns to the start and closes the route.
    fn finish(&self, g: &Group<T>, c: &Cursor<T>) -> Eval<T> {
        let m = self.matrices[g.slot];
        Eval {
            departure: c.departure,
            end: c.t + m.seconds(c.prev, g.start),
            meters: c.meters + m.meters(c.prev, g.start),
            lateness: c.lateness,
        }
    }

    fn initial_load(&self, acts: &[Act]) -> i64 {
        acts.iter()
            .filter(|a| a.kind == ActivityKind::Service)
            .map(|a| self.info[a.job as usize].size as i64)
            .sum()
    }

    /// Schedules `acts` on a vehicle of group `g`. `None` when capacity is
    /// exceeded anywhere along the route.
    fn eval(&self, g: &Group<T>, acts: &[Act], mut stamps: Option<&mut Vec<Stamp<T>>>) -> Option<Eval<T>> {
        let Some(&first) = acts.first() else {
            return Some(self.finish(g, &self.cursor(g, g.earliest, 0)));
        };
        let load = self.initial_load(acts);
        if load > g.vt.capacity as i64 {
            return None;
        }
        let mut c = self.cursor(g, self.departure_for(g, first), load);
        for &a in acts {
            let st = self.step(g, &mut c, a)?;
            if let Some(s) = stamps.as_deref_mut() {
                s.push(st);
            }
        }
        Some(self.finish(g, &c))
    }

    /// Cursor before each position of a feasible route.
    fn forward(&self, g: &Group<T>, route: &Route<T>) -> Vec<Cursor<T>> {
        let dep = route.acts.first().map_or(g.earliest, |&a| self.departure_for(g, a));
        let mut c = self.cursor(g, dep, route.load as i64);
        let mut out = Vec::with_capacity(route.acts.len() + 1);
        out.push(c);
        for &a in &route.acts {
            self.step(g, &mut c, a).expect("routes are kept feasible");
            out.push(c);
        }
        out
    }

    fn rebuild(&self, inst: usize, route: &mut Route<T>) {
        let g = &self.groups[self.inst_group[inst]];
        if route.acts.is_empty() {
            *route = Route::empty();
            return;
        }
        let e = self.eval(g, &route.acts, None).expect("routes are kept feasible");
        route.load = route
            .acts
            .iter()
            .filter(|a| a.kind == ActivityKind::Service)
            .map(|a| self.info[a.job as usize].size)
            .sum();
        route.timed = route.acts.iter().any(|a| self.info[a.job as usize].timed);
        route.meters = e.meters;
        route.seconds = e.end - e.departure;
        route.cost = g.vt.fixed_cost + g.vt.variable_cost(e.meters, e.end - e.departure);
        route.penalty = e.lateness * self.pen.window_per_second;
    }

    /// Cheapest way to add job `j` to the route of instance `inst`.
    fn best_insertion(&self, inst: usize, route: &Route<T>, j: usize) -> Option<Ins<T>> {
        let gi = self.inst_group[inst];
        if !self.compat[j][gi] {
            return None;
        }
        let g = &self.groups[gi];
        let info = &self.info[j];
        let n = route.acts.len();
        let mut best: Option<Ins<T>> = None;
        fn consider<T: Scalar>(best: &mut Option<Ins<T>>, delta: T, first: usize, second: usize) {
            if best.is_none_or(|b| delta < b.delta) {
                *best = Some(Ins { delta, first, second });
            }
        }

        if !info.shipment && !info.timed && !route.timed {
            if route.load + info.size > g.vt.capacity {
                return None;
            }
            let m = self.matrices[g.slot];
            let here = self.locs[g.slot][j][0];
            for pos in 0..=n {
                let prev = if pos == 0 { g.start } else { self.loc(g, route.acts[pos - 1]) };
                let next = if pos == n { g.start } else { self.loc(g, route.acts[pos]) };
                let dm = m.meters(prev, here) + m.meters(here, next) - m.meters(prev, next);
                let ds = m.seconds(prev, here) + m.seconds(here, next) - m.seconds(prev, next) + info.durations[0];
                let cost = g.vt.fixed_cost + g.vt.variable_cost(route.meters + dm, route.seconds + ds);
                consider(&mut best, cost - route.cost, pos, pos);
            }
            return best;
        }

        let old = route.objective();
        let job = j as u32;
        let fwd = self.forward(g, route);
        let cap = g.vt.capacity as i64;
        let size = info.size as i64;
        if !info.shipment {
            if route.load + info.size > g.vt.capacity {
                return None;
            }
            let act = Act {
                job,
                kind: ActivityKind::Service,
            };
            'pos: for pos in 0..=n {
                // the extra parcels ride along from the start
                if fwd[pos].peak + size > cap {
                    break;
                }
                let mut c = if pos == 0 {
                    self.cursor(g, self.departure_for(g, act), route.load as i64 + size)
                } else {
                    let mut c = fwd[pos];
                    c.load += size;
                    c.peak += size;
                    c
                };
                for &a in std::iter::once(&act).chain(&route.acts[pos..]) {
                    if self.step(g, &mut c, a).is_none() {
                        continue 'pos;
                    }
                }
                consider(&mut best, self.objective_of(g, &self.finish(g, &c)) - old, pos, pos);
            }
            return best;
        }

        let pickup = Act {
            job,
            kind: ActivityKind::Pickup,
        };
        let delivery = Act {
            job,
            kind: ActivityKind::Delivery,
        };
        for i in 0..=n {
            if fwd[i].load + size > cap {
                continue;
            }
            let mut c = if i == 0 {
                self.cursor(g, self.departure_for(g, pickup), route.load as i64)
            } else {
                fwd[i]
            };
            if self.step(g, &mut c, pickup).is_none() {
                continue;
            }
            for k in i..=n {
                let mut d = c;
                let ok = std::iter::once(&delivery)
                    .chain(&route.acts[k..])
                    .all(|&a| self.step(g, &mut d, a).is_some());
                if ok {
                    consider(&mut best, self.objective_of(g, &self.finish(g, &d)) - old, i, k);
                }
                if k == n || self.step(g, &mut c, route.acts[k]).is_none() {
                    break;
                }
            }
        }
        best
    }

    fn objective_of(&self, g: &Group<T>, e: &Eval<T>) -> T {
        g.vt.fixed_cost + g.vt.variable_cost(e.meters, e.end - e.departure) + e.lateness * self.pen.window_per_second
    }

    fn apply(&self, state: &mut State<T>, inst: usize, j: usize, ins: Ins<T>) {
        let route = &mut state.routes[inst];
        let job = j as u32;
        if self.info[j].shipment {
            route.acts.insert(
                ins.first,
                Act {
                    job,
                    kind: ActivityKind::Pickup,
                },
            );
            route.acts.insert(
                ins.second + 1,
                Act {
                    job,
                    kind: ActivityKind::Delivery,
                },
            );
        } else {
            route.acts.insert(
                ins.first,
                Act {
                    job,
                    kind: ActivityKind::Service,
                },
            );
        }
        self.rebuild(inst, route);
        state.assigned[j] = Some(inst as u32);
    }

    /// Non-empty instances plus the first empty instance of every group.
    fn active(&self, routes: &[Route<T>]) -> Vec<usize> {
        let mut out = Vec::new();
        for g in &self.groups {
            let mut empty_taken = false;
            for inst in g.first..g.first + g.count {
                if !routes[inst].acts.is_empty() {
                    out.push(inst);
                } else if !empty_taken {
                    out.push(inst);
                    empty_taken = true;
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn empty_state(&self) -> State<T> {
        State {
            routes: vec![Route::empty(); self.inst_group.len()],
            assigned: vec![None; self.jobs.len()],
            pending: Vec::new(),
        }
    }

    fn objective(&self, state: &State<T>) -> T {
        let routes = state.routes.iter().fold(T::zero(), |acc, r| acc + r.objective());
        let unserved = state.pending.len() + self.impossible.iter().filter(|r| r.is_some()).count();
        routes + from_u32::<T>(unserved as u32) * self.pen.unassigned
    }

    fn construct(&self) -> State<T> {
        let mut state = self.empty_state();
        let n_inst = self.inst_group.len();
        let mut pending: Vec<usize> = (0..self.jobs.len()).filter(|&j| self.impossible[j].is_none()).collect();
        let mut cache: Vec<Vec<Option<Ins<T>>>> = vec![vec![None; n_inst]; self.jobs.len()];
        let mut active = self.active(&state.routes);
        for &inst in &active {
            for &j in &pending {
                cache[j][inst] = self.best_insertion(inst, &state.routes[inst], j);
            }
        }

        while !pending.is_empty() {
            let mut pick: Option<(usize, usize, Ins<T>, T)> = None;
            let mut dead = Vec::new();
            for (pi, &j) in pending.iter().enumerate() {
                let mut best: Option<(usize, Ins<T>)> = None;
                let mut second: Option<T> = None;
                for &inst in &active {
                    if let Some(ins) = cache[j][inst] {
                        match best {
                            Some((_, b)) if ins.delta >= b.delta => {
                                if second.is_none_or(|s| ins.delta < s) {
                                    second = Some(ins.delta);
                                }
                            }
                            Some((_, b)) => {
                                second = Some(b.delta);
                                best = Some((inst, ins));
                            }
                            None => best = Some((inst, ins)),
                        }
                    }
                }
                let Some((inst, ins)) = best else {
                    dead.push(pi);
                    continue;
                };
                let regret = second.map_or(T::infinity(), |s| s - ins.delta);
                if pick.is_none_or(|(_, _, _, r)| regret > r) {
                    pick = Some((pi, inst, ins, regret));
                }
            }
            let Some((pi, inst, ins, _)) = pick else {
                state.pending.append(&mut pending);
                break;
            };
            let j = pending[pi];
            self.apply(&mut state, inst, j, ins);
            let dead_jobs: Vec<usize> = dead.iter().map(|&d| pending[d]).collect();
            state.pending.extend_from_slice(&dead_jobs);
            pending.retain(|&x| x != j && !dead_jobs.contains(&x));

            let next_active = self.active(&state.routes);
            for &i in &next_active {
                if i == inst || !active.contains(&i) {
                    for &jj in &pending {
                        cache[jj][i] = self.best_insertion(i, &state.routes[i], jj);
                    }
                }
            }
            active = next_active;
        }
        state.pending.sort_unstable();
        state.pending.dedup();
        state
    }

    fn recreate(&self, state: &mut State<T>, mut jobs: Vec<usize>, rng: &mut ChaCha8Rng) {
        jobs.shuffle(rng);
        for j in jobs {
            let mut best: Option<(usize, Ins<T>)> = None;
            for inst in self.active(&state.routes) {
                if let Some(ins) = self.best_insertion(inst, &state.routes[inst], j) {
                    if best.is_none_or(|(_, b)| ins.delta < b.delta) {
                        best = Some((inst, ins));
                    }
                }
            }
            match best {
                Some((inst, ins)) => self.apply(state, inst, j, ins),
                None => state.pending.push(j),
            }
        }
        state.pending.sort_unstable();
    }

    fn remove(&self, state: &mut State<T>, jobs: &[usize]) {
        let mut dirty = Vec::new();
        for &j in jobs {
            if let Some(inst) = state.assigned[j].take() {
                let inst = inst as usize;
                state.routes[inst].acts.retain(|a| a.job as usize != j);
                dirty.push(inst);
            }
        }
        dirty.sort_unstable();
        dirty.dedup();
        for inst in dirty {
            let mut route = std::mem::replace(&mut state.routes[inst], Route::empty());
            self.rebuild(inst, &mut route);
            state.routes[inst] = route;
        }
    }

    /// Nearest other jobs by travel distance between primary locations.
    fn neighbours(&self) -> Vec<Vec<u32>> {
        let n = self.jobs.len();
        let reference: Vec<Option<(usize, usize)>> = (0..n)
            .map(|j| {
                let g = self.compat[j].iter().position(|&c| c)?;
                let slot = self.groups[g].slot;
                let side = self.info[j].shipment as usize;
                Some((slot, self.locs[slot][j][side]))
            })
            .collect();
        (0..n)
            .map(|j| {
                let Some((slot, here)) = reference[j] else {
                    return Vec::new();
                };
                let m = self.matrices[slot];
                let side_of = |k: usize| self.info[k].shipment as usize;
                let mut others: Vec<(T, u32)> = (0..n)
                    .filter(|&k| k != j && reference[k].is_some())
                    .map(|k| {
                        let there = self.locs[slot][k][side_of(k)];
                        let d = if there == MISSING { T::infinity() } else { m.meters(here, there) };
                        (d, k as u32)
                    })
                    .collect();
                others.sort_by(|a, b| cmp(a.0, b.0).then(a.1.cmp(&b.1)));
                others.into_iter().map(|(_, k)| k).collect()
            })
            .collect()
    }

    fn improve(&self, mut best: State<T>, params: &SolverParams<T>) -> State<T> {
        let possible = self.impossible.iter().filter(|r| r.is_none()).count();
        if possible == 0 || params.iterations == 0 {
            return best;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let neighbours = self.neighbours();
        let share = params.ruin_fraction.clamp(0.0, 1.0);
        let target = ((share * possible as f64).ceil() as usize).max(1);
        let mut best_cost = self.objective(&best);

        for it in 0..params.iterations {
            let mut cand = best.clone();
            let assigned: Vec<usize> = (0..self.jobs.len()).filter(|&j| cand.assigned[j].is_some()).collect();
            let count = target.min(assigned.len());
            let mut removed: Vec<usize> = if count == 0 {
                Vec::new()
            } else if it % 3 == 2 {
                // route ruin: empty one tour so its jobs can consolidate elsewhere
                let used: Vec<usize> = (0..cand.routes.len()).filter(|&r| !cand.routes[r].acts.is_empty()).collect();
                let r = used[rng.random_range(0..used.len())] as u32;
                assigned.iter().copied().filter(|&j| cand.assigned[j] == Some(r)).collect()
            } else if it % 3 == 0 {
                let mut picked: Vec<usize> = index::sample(&mut rng, assigned.len(), count)
                    .into_iter()
                    .map(|i| assigned[i])
                    .collect();
                picked.sort_unstable();
                picked
            } else {
                // radial size varies around the random-ruin size so whole
                // routes can empty out on small instances
                let size = rng.random_range(1..=assigned.len().min(2 * count + 2));
                let seed_job = assigned[rng.random_range(0..assigned.len())];
                let mut picked = vec![seed_job];
                picked.extend(
                    neighbours[seed_job]
                        .iter()
                        .map(|&k| k as usize)
                        .filter(|&k| cand.assigned[k].is_some())
                        .take(size - 1),
                );
                picked.sort_unstable();
                picked
            };
            self.remove(&mut cand, &removed);
            removed.append(&mut cand.pending);
            removed.sort_unstable();
            self.recreate(&mut cand, removed, &mut rng);
            let cost = self.objective(&cand);
            if cost < best_cost {
                best = cand;
                best_cost = cost;
            }
        }
        best
    }

    fn to_solution(&self, state: &State<T>) -> Solution<T> {
        let mut tours = Vec::new();
        let mut penalty = T::zero();
        let mut total = T::zero();
        for (inst, route) in state.routes.iter().enumerate() {
            if route.acts.is_empty() {
                continue;
            }
            let g = &self.groups[self.inst_group[inst]];
            let mut stamps = Vec::with_capacity(route.acts.len());
            let e = self.eval(g, &route.acts, Some(&mut stamps)).expect("feasible route");
            let activities = route
                .acts
                .iter()
                .zip(&stamps)
                .map(|(&a, s)| {
                    let info = &self.info[a.job as usize];
                    let job = &self.jobs[a.job as usize];
                    let location = match job {
                        Job::Service(x) => x.location.clone(),
                        Job::Shipment(x) if a.kind == ActivityKind::Pickup => x.pickup.clone(),
                        Job::Shipment(x) => x.delivery.clone(),
                    };
                    Activity {
                        job_id: job.id().to_string(),
                        kind: a.kind,
                        location,
                        size: info.size,
                        window: info.windows[a.side()],
                        duration: info.durations[a.side()],
                        arrival: s.arrival,
                        start: s.start,
                        departure: s.departure,
                        load_after: s.load_after,
                    }
                })
                .collect();
            penalty = penalty + route.penalty;
            total = total + route.objective();
            tours.push(Tour {
                id: format!("t{:03}", tours.len()),
                vehicle_type: g.vt.clone(),
                start_location: g.start_id.to_string(),
                departure: e.departure,
                arrival: e.end,
                initial_load: route.load,
                meters: e.meters,
                activities,
            });
        }

        let mut unassigned: Vec<(usize, String)> = state
            .pending
            .iter()
            .map(|&j| (j, "no feasible insertion with the available fleet".to_string()))
            .collect();
        unassigned.extend(
            self.impossible
                .iter()
                .enumerate()
                .filter_map(|(j, r)| r.clone().map(|r| (j, r))),
        );
        unassigned.sort_by_key(|(j, _)| *j);
        let unserved = from_u32::<T>(unassigned.len() as u32) * self.pen.unassigned;
        Solution {
            tours,
            unassigned: unassigned
                .into_iter()
                .map(|(j, reason)| Unassigned {
                    job_id: self.jobs[j].id().to_string(),
                    reason,
                })
                .collect(),
            total_cost: total + unserved,
            penalty_cost: penalty + unserved,
            penalties: self.pen,
        }
    }
}

/// Solves one routing problem. Capacity and precedence are hard; windows
/// are soft with a per-second penalty; jobs that cannot be placed are
/// listed as unassigned with a reason and penalised.
pub fn solve<T: Scalar>(
    jobs: &[Job<T>],
    fleet: &[FleetEntry<T>],
    matrices: &Matrices<T>,
    params: &SolverParams<T>,
) -> Result<Solution<T>, VrpError> {
    let problem = Problem::new(jobs, fleet, matrices, params.penalties())?;
    let initial = problem.construct();
    let best = problem.improve(initial, params);
    Ok(problem.to_solution(&best))
}
