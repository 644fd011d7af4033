//! Exhaustive optimum for tiny instances, used as a test oracle.
//!
//! For every vehicle group and every subset of compatible jobs, all
//! precedence-respecting orderings are enumerated; a subset DP then picks
//! the cheapest assignment of subsets to vehicle instances, allowing jobs
//! to stay unassigned at the unassigned-job penalty.

use super::cost::{replay, Stop};
use super::{
    planned_departure, Activity, ActivityKind, FleetEntry, Job, Matrices, Penalties, Solution, Tour, Unassigned,
    VrpError,
};
use crate::network::TravelMatrix;
use crate::scalar::{from_u32, Scalar};

pub const BRUTE_FORCE_MAX_JOBS: usize = 8;
pub const BRUTE_FORCE_MAX_ACTIVITIES: usize = 12;

struct GroupCtx<'a, T> {
    entry: &'a FleetEntry<T>,
    matrix: &'a TravelMatrix<T>,
    start: usize,
    /// Per job, the stops this job contributes in the group's matrix.
    stops: Vec<Option<Vec<(Stop<T>, usize)>>>,
    compat_mask: u32,
}

/// Cost of driving `order` from the group start, or `None` if a load bound breaks.
fn sequence_cost<T: Scalar>(g: &GroupCtx<T>, order: &[Stop<T>], window_rate: T) -> Option<T> {
    let vt = &g.entry.vehicle_type;
    let m = g.matrix;
    let cap = vt.capacity as i64;
    let mut load: i64 = order
        .iter()
        .filter(|s| s.kind == ActivityKind::Service)
        .map(|s| s.size as i64)
        .sum();
    if load > cap {
        return None;
    }
    let departure = planned_departure(g.entry.earliest_start, order[0].window, m.seconds(g.start, order[0].loc));
    let mut clock = departure;
    let mut at = g.start;
    let mut meters = T::zero();
    let mut late = T::zero();
    for s in order {
        meters = meters + m.meters(at, s.loc);
        let arrive = clock + m.seconds(at, s.loc);
        clock = arrive;
        if let Some(w) = s.window {
            if arrive < w.earliest {
                clock = w.earliest;
            }
            if arrive > w.latest {
                late = late + (arrive - w.latest);
            }
        }
        clock = clock + s.duration;
        match s.kind {
            ActivityKind::Pickup => load += s.size as i64,
            _ => load -= s.size as i64,
        }
        if load < 0 || load > cap {
            return None;
        }
        at = s.loc;
    }
    meters = meters + m.meters(at, g.start);
    clock = clock + m.seconds(at, g.start);
    Some(vt.fixed_cost + meters * vt.cost_per_meter + (clock - departure) * vt.cost_per_second + late * window_rate)
}

struct Search<'s, T> {
    pool: Vec<(Stop<T>, usize, bool)>,
    used: Vec<bool>,
    order: Vec<usize>,
    best: Option<(T, Vec<usize>)>,
    scratch: Vec<Stop<T>>,
    ctx: &'s GroupCtx<'s, T>,
    rate: T,
}

impl<T: Scalar> Search<'_, T> {
    fn dfs(&mut self) {
        if self.order.len() == self.pool.len() {
            self.scratch.clear();
            self.scratch.extend(self.order.iter().map(|&i| self.pool[i].0));
            if let Some(c) = sequence_cost(self.ctx, &self.scratch, self.rate) {
                if self.best.as_ref().is_none_or(|(b, _)| c < *b) {
                    self.best = Some((c, self.order.clone()));
                }
            }
            return;
        }
        for i in 0..self.pool.len() {
            if self.used[i] {
                continue;
            }
            let (stop, job, _) = self.pool[i];
            // a delivery needs its pickup placed already
            if stop.kind == ActivityKind::Delivery
                && !self
                    .order
                    .iter()
                    .any(|&k| self.pool[k].1 == job && self.pool[k].0.kind == ActivityKind::Pickup)
            {
                continue;
            }
            self.used[i] = true;
            self.order.push(i);
            self.dfs();
            self.order.pop();
            self.used[i] = false;
        }
    }
}

fn best_route<T: Scalar>(g: &GroupCtx<T>, mask: u32, rate: T) -> Option<(T, Vec<(Stop<T>, usize)>)> {
    let mut pool = Vec::new();
    for (j, stops) in g.stops.iter().enumerate() {
        if mask & (1 << j) != 0 {
            for &(s, job) in stops.as_ref()? {
                pool.push((s, job, false));
            }
        }
    }
    let n = pool.len();
    let mut search = Search {
        pool,
        used: vec![false; n],
        order: Vec::with_capacity(n),
        best: None,
        scratch: Vec::with_capacity(n),
        ctx: g,
        rate,
    };
    search.dfs();
    let (cost, order) = search.best?;
    Some((cost, order.iter().map(|&i| (search.pool[i].0, search.pool[i].1)).collect()))
}

/// Provably minimal-cost solution by exhaustive enumeration. Refuses
/// instances above [`BRUTE_FORCE_MAX_JOBS`] jobs or
/// [`BRUTE_FORCE_MAX_ACTIVITIES`] activities.
pub fn brute_force<T: Scalar>(
    jobs: &[Job<T>],
    fleet: &[FleetEntry<T>],
    matrices: &Matrices<T>,
    penalties: Penalties<T>,
) -> Result<Solution<T>, VrpError> {
    let activities: usize = jobs.iter().map(|j| j.activity_count()).sum();
    if jobs.len() > BRUTE_FORCE_MAX_JOBS || activities > BRUTE_FORCE_MAX_ACTIVITIES {
        return Err(VrpError::TooLarge {
            jobs: jobs.len(),
            activities,
        });
    }
    for job in jobs {
        job.validate()?;
    }
    let n = jobs.len();

    let mut groups = Vec::new();
    for entry in fleet {
        let vt = &entry.vehicle_type;
        let matrix = matrices.require(vt.mode)?;
        let start = matrix.index_of(&entry.start).ok_or_else(|| VrpError::UnknownLocation {
            location: entry.start.clone(),
            mode: vt.mode,
        })?;
        let mut compat_mask = 0u32;
        let stops: Vec<Option<Vec<(Stop<T>, usize)>>> = jobs
            .iter()
            .enumerate()
            .map(|(j, job)| {
                if job.size() > vt.capacity {
                    return None;
                }
                let stops = match job {
                    Job::Service(s) => {
                        if s.modes.as_ref().is_some_and(|m| !m.contains(&vt.mode))
                            || s.origin.as_ref().is_some_and(|o| *o != entry.start)
                        {
                            return None;
                        }
                        vec![(
                            Stop {
                                loc: matrix.index_of(&s.location)?,
                                kind: ActivityKind::Service,
                                size: s.size,
                                window: s.window,
                                duration: s.duration,
                            },
                            j,
                        )]
                    }
                    Job::Shipment(s) => vec![
                        (
                            Stop {
                                loc: matrix.index_of(&s.pickup)?,
                                kind: ActivityKind::Pickup,
                                size: s.size,
                                window: s.pickup_window,
                                duration: s.pickup_duration,
                            },
                            j,
                        ),
                        (
                            Stop {
                                loc: matrix.index_of(&s.delivery)?,
                                kind: ActivityKind::Delivery,
                                size: s.size,
                                window: Some(s.delivery_window),
                                duration: s.delivery_duration,
                            },
                            j,
                        ),
                    ],
                };
                compat_mask |= 1 << j;
                Some(stops)
            })
            .collect();
        groups.push(GroupCtx {
            entry,
            matrix,
            start,
            stops,
            compat_mask,
        });
    }

    let full = if n == 0 { 0 } else { (1u32 << n) - 1 };
    let rate = penalties.window_per_second;
    // routes[g][mask]
    let routes: Vec<Vec<Option<(T, Vec<(Stop<T>, usize)>)>>> = groups
        .iter()
        .map(|g| {
            (0..=full)
                .map(|mask| {
                    if mask == 0 || mask & !g.compat_mask != 0 {
                        None
                    } else {
                        best_route(g, mask, rate)
                    }
                })
                .collect()
        })
        .collect();

    // one DP layer per vehicle instance; more instances than jobs never help
    let instances: Vec<usize> = groups
        .iter()
        .enumerate()
        .flat_map(|(gi, g)| std::iter::repeat_n(gi, g.entry.count.min(n)))
        .collect();
    let size = (full as usize) + 1;
    let mut dp: Vec<Option<T>> = vec![None; size];
    dp[0] = Some(T::zero());
    // choice[layer][mask] = subset given to that instance
    let mut choice: Vec<Vec<u32>> = Vec::with_capacity(instances.len());
    for &gi in &instances {
        let mut next = dp.clone();
        let mut pick = vec![0u32; size];
        for mask in 1..size as u32 {
            let mut sub = mask & groups[gi].compat_mask;
            while sub != 0 {
                if let (Some(base), Some((c, _))) = (dp[(mask ^ sub) as usize], &routes[gi][sub as usize]) {
                    let cand = base + *c;
                    if next[mask as usize].is_none_or(|cur| cand < cur) {
                        next[mask as usize] = Some(cand);
                        pick[mask as usize] = sub;
                    }
                }
                sub = (sub - 1) & mask & groups[gi].compat_mask;
            }
        }
        dp = next;
        choice.push(pick);
    }

    let mut best: Option<(T, u32)> = None;
    for mask in 0..size as u32 {
        if let Some(c) = dp[mask as usize] {
            let missing = n as u32 - mask.count_ones();
            let total = c + from_u32::<T>(missing) * penalties.unassigned;
            if best.is_none_or(|(b, _)| total < b) {
                best = Some((total, mask));
            }
        }
    }
    let (_, served) = best.expect("empty assignment is always available");

    // walk the layers backwards to recover each instance's subset
    let mut assigned: Vec<(usize, u32)> = Vec::new();
    let mut mask = served;
    for layer in (0..instances.len()).rev() {
        let sub = choice[layer][mask as usize];
        if sub != 0 {
            assigned.push((instances[layer], sub));
            mask ^= sub;
        }
    }
    assigned.reverse();

    let mut tours = Vec::new();
    let mut total = T::zero();
    let mut penalty = T::zero();
    for (gi, sub) in assigned {
        let g = &groups[gi];
        let (_, seq) = routes[gi][sub as usize].as_ref().expect("chosen route exists");
        let stops: Vec<Stop<T>> = seq.iter().map(|(s, _)| *s).collect();
        let departure = planned_departure(g.entry.earliest_start, stops[0].window, g.matrix.seconds(g.start, stops[0].loc));
        let r = replay(g.matrix, g.start, departure, &stops);
        let vt = &g.entry.vehicle_type;
        let window_pen = r.total_lateness() * rate;
        total = total + r.operating_cost(vt) + window_pen;
        penalty = penalty + window_pen;
        let activities = seq
            .iter()
            .zip(r.times.iter().zip(&r.loads_after))
            .map(|(&(s, j), (&(arrival, start, departure), &load))| Activity {
                job_id: jobs[j].id().to_string(),
                kind: s.kind,
                location: g.matrix.locations()[s.loc].clone(),
                size: s.size,
                window: s.window,
                duration: s.duration,
                arrival,
                start,
                departure,
                load_after: load as u32,
            })
            .collect();
        tours.push(Tour {
            id: format!("t{:03}", tours.len()),
            vehicle_type: vt.clone(),
            start_location: g.entry.start.clone(),
            departure,
            arrival: r.end,
            initial_load: r.initial_load as u32,
            meters: r.meters,
            activities,
        });
    }

    let unassigned: Vec<Unassigned> = (0..n)
        .filter(|&j| served & (1 << j) == 0)
        .map(|j| Unassigned {
            job_id: jobs[j].id().to_string(),
            reason: if groups.iter().all(|g| g.compat_mask & (1 << j) == 0) {
                "no compatible vehicle".to_string()
            } else {
                "cheaper to leave unassigned".to_string()
            },
        })
        .collect();
    let unserved = from_u32::<T>(unassigned.len() as u32) * penalties.unassigned;
    Ok(Solution {
        tours,
        unassigned,
        total_cost: total + unserved,
        penalty_cost: penalty + unserved,
        penalties,
    })
}
