//! Evaluation metrics: distances by vehicle class, ground load factor,
//! CO₂, vehicle counts and operating cost, per run and averaged over
//! replications.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{from_u32, lit, Scalar};
use crate::scenario::ScenarioKind;
use crate::sim::TourExecution;
use crate::vrp::{VehicleType, CEP_CARGO_BIKE, CEP_VEHICLE, FREIGHT_SHUTTLE, SUPPLY_TRUCK};

#[derive(Debug, Error)]
pub enum KpiError {
    #[error("vehicle type `{0}` has no emission class")]
    UnmappedVehicle(String),
    #[error("emission factor `{name}` must be finite and non-negative, got {value}")]
    BadFactor { name: &'static str, value: f64 },
    #[error("shuttles produce no local emissions; factor must be 0")]
    ShuttleFactor,
    #[error("no reports to aggregate")]
    Empty,
    #[error("cannot average {0} with {1}")]
    MixedScenarios(ScenarioKind, ScenarioKind),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleClass {
    LightCommercial,
    HeavyDuty,
    Shuttle,
    Bike,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 4] = [
        VehicleClass::LightCommercial,
        VehicleClass::HeavyDuty,
        VehicleClass::Shuttle,
        VehicleClass::Bike,
    ];

    pub fn of(vehicle_type: &str) -> Result<Self, KpiError> {
        match vehicle_type {
            CEP_VEHICLE => Ok(VehicleClass::LightCommercial),
            SUPPLY_TRUCK => Ok(VehicleClass::HeavyDuty),
            FREIGHT_SHUTTLE => Ok(VehicleClass::Shuttle),
            CEP_CARGO_BIKE => Ok(VehicleClass::Bike),
            other => Err(KpiError::UnmappedVehicle(other.to_string())),
        }
    }

    /// Road vehicles: everything except shuttles and bikes.
    pub fn is_ground(self) -> bool {
        matches!(self, VehicleClass::LightCommercial | VehicleClass::HeavyDuty)
    }
}

/// One value per vehicle class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ByClass<T> {
    pub light_commercial: T,
    pub heavy_duty: T,
    pub shuttle: T,
    pub bike: T,
}

impl<T: Copy> ByClass<T> {
    pub fn get(&self, class: VehicleClass) -> T {
        match class {
            VehicleClass::LightCommercial => self.light_commercial,
            VehicleClass::HeavyDuty => self.heavy_duty,
            VehicleClass::Shuttle => self.shuttle,
            VehicleClass::Bike => self.bike,
        }
    }

    pub fn get_mut(&mut self, class: VehicleClass) -> &mut T {
        match class {
            VehicleClass::LightCommercial => &mut self.light_commercial,
            VehicleClass::HeavyDuty => &mut self.heavy_duty,
            VehicleClass::Shuttle => &mut self.shuttle,
            VehicleClass::Bike => &mut self.bike,
        }
    }

    pub fn map<U>(&self, f: impl Fn(T) -> U) -> ByClass<U> {
        ByClass {
            light_commercial: f(self.light_commercial),
            heavy_duty: f(self.heavy_duty),
            shuttle: f(self.shuttle),
            bike: f(self.bike),
        }
    }
}

impl<T: Scalar> ByClass<T> {
    pub fn zero() -> Self {
        ByClass {
            light_commercial: T::zero(),
            heavy_duty: T::zero(),
            shuttle: T::zero(),
            bike: T::zero(),
        }
    }

    pub fn total(&self) -> T {
        self.light_commercial + self.heavy_duty + self.shuttle + self.bike
    }
}

/// Grams of CO₂ per vehicle kilometre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmissionFactors<T>(pub ByClass<T>);

impl<T: Scalar> Default for EmissionFactors<T> {
    fn default() -> Self {
        EmissionFactors(ByClass {
            light_commercial: lit(197.295),
            heavy_duty: lit(789.505),
            shuttle: T::zero(),
            bike: T::zero(),
        })
    }
}

impl<T: Scalar> EmissionFactors<T> {
    pub fn validate(&self) -> Result<(), KpiError> {
        let f = &self.0;
        for (name, v) in [
            ("light_commercial", f.light_commercial),
            ("heavy_duty", f.heavy_duty),
            ("shuttle", f.shuttle),
            ("bike", f.bike),
        ] {
            if !(v.is_finite() && v >= T::zero()) {
                return Err(KpiError::BadFactor {
                    name,
                    value: crate::scalar::to_f64(v),
                });
            }
        }
        if f.shuttle != T::zero() {
            return Err(KpiError::ShuttleFactor);
        }
        Ok(())
    }

    /// Tonnes for `km` driven by `class`.
    pub fn tonnes(&self, class: VehicleClass, km: T) -> T {
        km * self.0.get(class) / lit(1e6)
    }
}

fn km<T: Scalar>(meters: T) -> T {
    meters / lit(1000.0)
}

/// Kilometres driven per class.
pub fn distance_by_class<T: Scalar>(executions: &[TourExecution<T>]) -> Result<ByClass<T>, KpiError> {
    let mut out = ByClass::zero();
    for e in executions {
        let c = VehicleClass::of(&e.vehicle_type)?;
        *out.get_mut(c) = out.get(c) + km(e.meters);
    }
    Ok(out)
}

/// CO₂ tonnes per class; the total is [`ByClass::total`].
pub fn emissions<T: Scalar>(executions: &[TourExecution<T>], factors: &EmissionFactors<T>) -> Result<ByClass<T>, KpiError> {
    let d = distance_by_class(executions)?;
    let mut out = ByClass::zero();
    for c in VehicleClass::ALL {
        *out.get_mut(c) = factors.tonnes(c, d.get(c));
    }
    Ok(out)
}

/// Mean of initial load ÷ capacity over non-shuttle tours; `None` when there are none.
pub fn load_factor<T: Scalar>(executions: &[TourExecution<T>]) -> Result<Option<T>, KpiError> {
    let mut sum = T::zero();
    let mut n = 0u32;
    for e in executions {
        if VehicleClass::of(&e.vehicle_type)? == VehicleClass::Shuttle || e.capacity == 0 {
            continue;
        }
        sum = sum + from_u32::<T>(e.initial_load) / from_u32(e.capacity);
        n += 1;
    }
    Ok((n > 0).then(|| sum / from_u32(n)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourLengthRow<T> {
    pub vehicle_type: String,
    pub tour_id: String,
    pub km: T,
    pub load_factor: T,
}

pub fn tour_length_table<T: Scalar>(executions: &[TourExecution<T>]) -> Vec<TourLengthRow<T>> {
    executions
        .iter()
        .map(|e| TourLengthRow {
            vehicle_type: e.vehicle_type.clone(),
            tour_id: e.tour_id.clone(),
            km: km(e.meters),
            load_factor: if e.capacity == 0 {
                T::zero()
            } else {
                from_u32::<T>(e.initial_load) / from_u32(e.capacity)
            },
        })
        .collect()
}

pub fn write_tour_lengths<T: Scalar, W: Write>(rows: &[TourLengthRow<T>], out: W) -> Result<(), KpiError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["vehicle_type", "tour_id", "km", "load_factor"])?;
    for r in rows {
        w.write_record([r.vehicle_type.clone(), r.tour_id.clone(), r.km.to_string(), r.load_factor.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport<T> {
    pub scenario: ScenarioKind,
    /// Number of runs averaged into this report.
    pub replications: usize,
    pub total_distance_km: T,
    pub ground_distance_km: T,
    pub shuttle_distance_km: T,
    pub bike_distance_km: T,
    pub distance_km: ByClass<T>,
    /// `None` when no ground tour ran.
    pub average_ground_vehicle_load: Option<T>,
    pub co2_t: ByClass<T>,
    pub co2_total_t: T,
    /// Exact (possibly fractional after averaging) tour counts.
    pub vehicles: ByClass<T>,
    /// `vehicles` rounded half-up.
    pub vehicles_rounded: ByClass<u64>,
    pub operating_cost: ByClass<T>,
}

fn round_half_up<T: Scalar>(v: T) -> u64 {
    (v + lit(0.5)).floor().to_u64().unwrap_or(0)
}

fn canonical_type<T: Scalar>(class: VehicleClass) -> VehicleType<T> {
    match class {
        VehicleClass::LightCommercial => VehicleType::cep_vehicle(),
        VehicleClass::HeavyDuty => VehicleType::supply_truck(),
        VehicleClass::Shuttle => VehicleType::freight_shuttle(),
        VehicleClass::Bike => VehicleType::cep_cargo_bike(),
    }
}

impl<T: Scalar> KpiReport<T> {
    /// Report for one run from all executed tours (ground, bike and shuttle).
    pub fn from_executions(
        scenario: ScenarioKind,
        executions: &[TourExecution<T>],
        factors: &EmissionFactors<T>,
    ) -> Result<Self, KpiError> {
        factors.validate()?;
        let distance_km = distance_by_class(executions)?;
        let co2_t = emissions(executions, factors)?;
        let mut vehicles = ByClass::zero();
        let mut operating_cost = ByClass::zero();
        for e in executions {
            let c = VehicleClass::of(&e.vehicle_type)?;
            *vehicles.get_mut(c) = vehicles.get(c) + T::one();
            let vt = canonical_type::<T>(c);
            *operating_cost.get_mut(c) = operating_cost.get(c) + vt.fixed_cost + vt.variable_cost(e.meters, e.seconds);
        }
        Ok(Self::assemble(
            scenario,
            1,
            distance_km,
            load_factor(executions)?,
            co2_t,
            vehicles,
            operating_cost,
        ))
    }

    fn assemble(
        scenario: ScenarioKind,
        replications: usize,
        distance_km: ByClass<T>,
        average_ground_vehicle_load: Option<T>,
        co2_t: ByClass<T>,
        vehicles: ByClass<T>,
        operating_cost: ByClass<T>,
    ) -> Self {
        let ground = distance_km.light_commercial + distance_km.heavy_duty;
        KpiReport {
            scenario,
            replications,
            total_distance_km: ground + distance_km.shuttle + distance_km.bike,
            ground_distance_km: ground,
            shuttle_distance_km: distance_km.shuttle,
            bike_distance_km: distance_km.bike,
            distance_km,
            average_ground_vehicle_load,
            co2_t,
            co2_total_t: co2_t.total(),
            vehicles,
            vehicles_rounded: vehicles.map(round_half_up),
            operating_cost,
        }
    }

    /// Ground CO₂: light commercial plus heavy duty.
    pub fn co2_ground_t(&self) -> T {
        self.co2_t.light_commercial + self.co2_t.heavy_duty
    }
}

/// Field-wise mean of reports for one scenario.
pub fn aggregate_replications<T: Scalar>(reports: &[KpiReport<T>]) -> Result<KpiReport<T>, KpiError> {
    let first = reports.first().ok_or(KpiError::Empty)?;
    if let Some(r) = reports.iter().find(|r| r.scenario != first.scenario) {
        return Err(KpiError::MixedScenarios(first.scenario, r.scenario));
    }
    let n: T = T::from_usize(reports.len()).expect("report count fits scalar");
    let mean = |f: &dyn Fn(&KpiReport<T>) -> ByClass<T>| {
        let mut acc = ByClass::<T>::zero();
        for r in reports {
            let v = f(r);
            for c in VehicleClass::ALL {
                *acc.get_mut(c) = acc.get(c) + v.get(c);
            }
        }
        acc.map(|x| x / n)
    };
    let loads: Option<Vec<T>> = reports.iter().map(|r| r.average_ground_vehicle_load).collect();
    let load = loads.map(|v| v.into_iter().fold(T::zero(), |a, b| a + b) / n);
    Ok(KpiReport::assemble(
        first.scenario,
        reports.iter().map(|r| r.replications).sum(),
        mean(&|r| r.distance_km),
        load,
        mean(&|r| r.co2_t),
        mean(&|r| r.vehicles),
        mean(&|r| r.operating_cost),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta<T> {
    pub field: String,
    pub base: T,
    pub variant: T,
    pub delta: T,
    /// Percent change; `None` when the base is zero.
    pub pct: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison<T> {
    pub base: ScenarioKind,
    pub variant: ScenarioKind,
    pub deltas: Vec<Delta<T>>,
}

impl<T: Scalar> Comparison<T> {
    pub fn get(&self, field: &str) -> Option<&Delta<T>> {
        self.deltas.iter().find(|d| d.field == field)
    }
}

fn headline<T: Scalar>(r: &KpiReport<T>) -> Vec<(&'static str, T)> {
    vec![
        ("total_km", r.total_distance_km),
        ("ground_km", r.ground_distance_km),
        ("shuttle_km", r.shuttle_distance_km),
        ("bike_km", r.bike_distance_km),
        ("avg_ground_load", r.average_ground_vehicle_load.unwrap_or_else(T::nan)),
        ("co2_cep_t", r.co2_t.light_commercial),
        ("co2_truck_t", r.co2_t.heavy_duty),
        ("co2_total_t", r.co2_total_t),
        ("vehicles_cep", r.vehicles.light_commercial),
        ("vehicles_truck", r.vehicles.heavy_duty),
        ("vehicles_shuttle", r.vehicles.shuttle),
        ("vehicles_bike", r.vehicles.bike),
        ("operating_cost", r.operating_cost.total()),
    ]
}

pub fn compare<T: Scalar>(base: &KpiReport<T>, variant: &KpiReport<T>) -> Comparison<T> {
    let deltas = headline(base)
        .into_iter()
        .zip(headline(variant))
        .map(|((field, b), (_, v))| Delta {
            field: field.to_string(),
            base: b,
            variant: v,
            delta: v - b,
            pct: (b != T::zero() && b.is_finite()).then(|| (v - b) / b * lit(100.0)),
        })
        .collect();
    Comparison {
        base: base.scenario,
        variant: variant.scenario,
        deltas,
    }
}

pub const COMPARISON_HEADER: [&str; 9] = [
    "scenario",
    "total_km",
    "ground_km",
    "shuttle_km",
    "bike_km",
    "avg_ground_load",
    "co2_cep_t",
    "co2_truck_t",
    "co2_total_t",
];

/// One row per scenario, columns as in [`COMPARISON_HEADER`].
pub fn write_comparison<T: Scalar, W: Write>(reports: &[KpiReport<T>], out: W) -> Result<(), KpiError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARISON_HEADER)?;
    for r in reports {
        w.write_record([
            r.scenario.label().to_string(),
            r.total_distance_km.to_string(),
            r.ground_distance_km.to_string(),
            r.shuttle_distance_km.to_string(),
            r.bike_distance_km.to_string(),
            r.average_ground_vehicle_load.map(|v| v.to_string()).unwrap_or_default(),
            r.co2_t.light_commercial.to_string(),
            r.co2_t.heavy_duty.to_string(),
            r.co2_total_t.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Mode;
    use approx::assert_relative_eq;

    fn exec(vt: &str, meters: f64, load: u32, cap: u32) -> TourExecution<f64> {
        TourExecution {
            tour_id: format!("{vt}-{meters}"),
            vehicle_type: vt.into(),
            mode: Mode::Road,
            start_location: "a".into(),
            start: 0.0,
            end: 100.0,
            meters,
            seconds: 100.0,
            initial_load: load,
            capacity: cap,
            activities: vec![],
            traversals: vec![],
        }
    }

    #[test]
    fn factors_per_thousand_km() {
        let f = EmissionFactors::<f64>::default();
        let e = emissions(&[exec(CEP_VEHICLE, 1e6, 0, 230)], &f).unwrap();
        assert_relative_eq!(e.light_commercial, 0.197295, max_relative = 1e-9);
        let e = emissions(&[exec(SUPPLY_TRUCK, 1e6, 0, 800)], &f).unwrap();
        assert_relative_eq!(e.heavy_duty, 0.789505, max_relative = 1e-9);
        let e = emissions(&[exec(FREIGHT_SHUTTLE, 1e6, 0, 140), exec(CEP_CARGO_BIKE, 1e6, 0, 23)], &f).unwrap();
        assert_eq!(e.total(), 0.0);
        assert!(emissions(&[exec("Zeppelin", 1.0, 0, 1)], &f).is_err());
    }

    #[test]
    fn factor_validation() {
        let mut f = EmissionFactors::<f64>::default();
        f.validate().unwrap();
        f.0.shuttle = 1.0;
        assert!(matches!(f.validate(), Err(KpiError::ShuttleFactor)));
        f.0.shuttle = 0.0;
        f.0.bike = -1.0;
        assert!(f.validate().is_err());
    }

    #[test]
    fn load_factor_examples() {
        assert_relative_eq!(load_factor(&[exec(CEP_VEHICLE, 1.0, 184, 230)]).unwrap().unwrap(), 0.8);
        let full = [exec(CEP_VEHICLE, 1.0, 230, 230), exec(SUPPLY_TRUCK, 1.0, 800, 800)];
        assert_eq!(load_factor(&full).unwrap(), Some(1.0));
        let two = [exec(CEP_VEHICLE, 1.0, 138, 230), exec(CEP_VEHICLE, 1.0, 230, 230)];
        assert_relative_eq!(load_factor(&two).unwrap().unwrap(), 0.8);
        // shuttles do not count
        let with_shuttle = [exec(CEP_VEHICLE, 1.0, 230, 230), exec(FREIGHT_SHUTTLE, 1.0, 0, 140)];
        assert_eq!(load_factor(&with_shuttle).unwrap(), Some(1.0));
        assert_eq!(load_factor::<f64>(&[]).unwrap(), None);
    }

    #[test]
    fn tour_table_rows_sum_to_total() {
        assert!(tour_length_table::<f64>(&[]).is_empty());
        let ex = [
            exec(CEP_VEHICLE, 1500.0, 1, 230),
            exec(SUPPLY_TRUCK, 2500.0, 800, 800),
            exec(CEP_CARGO_BIKE, 500.0, 0, 23),
        ];
        let rows = tour_length_table(&ex);
        assert_eq!(rows.len(), 3);
        let r = KpiReport::from_executions(ScenarioKind::WhuB, &ex, &EmissionFactors::default()).unwrap();
        assert_relative_eq!(rows.iter().map(|r| r.km).sum::<f64>(), r.total_distance_km);
        let mut buf = Vec::new();
        write_tour_lengths::<f64, _>(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "vehicle_type,tour_id,km,load_factor\n");
    }

    #[test]
    fn report_partitions_distance() {
        let ex = [
            exec(CEP_VEHICLE, 10_000.0, 200, 230),
            exec(SUPPLY_TRUCK, 20_000.0, 800, 800),
            exec(FREIGHT_SHUTTLE, 5_000.0, 140, 140),
            exec(CEP_CARGO_BIKE, 2_000.0, 23, 23),
        ];
        let r = KpiReport::from_executions(ScenarioKind::WhuB, &ex, &EmissionFactors::default()).unwrap();
        assert_relative_eq!(r.total_distance_km, 37.0);
        assert_relative_eq!(r.ground_distance_km, 30.0);
        assert_relative_eq!(r.shuttle_distance_km, 5.0);
        assert_relative_eq!(r.bike_distance_km, 2.0);
        assert_relative_eq!(r.co2_total_t, (10.0 * 197.295 + 20.0 * 789.505) / 1e6, max_relative = 1e-12);
        assert_eq!(r.vehicles_rounded.light_commercial, 1);
        assert_relative_eq!(r.operating_cost.light_commercial, 48.8 + 10_000.0 * 0.00037 + 100.0 * 0.0063);
        let load = r.average_ground_vehicle_load.unwrap();
        assert_relative_eq!(load, (200.0 / 230.0 + 1.0 + 1.0) / 3.0);
    }

    #[test]
    fn aggregate_means_and_rounding() {
        let f = EmissionFactors::default();
        let reps: Vec<_> = [100.0, 110.0, 120.0]
            .iter()
            .enumerate()
            .map(|(i, km)| {
                let mut ex = vec![exec(CEP_VEHICLE, km * 1000.0, 100, 230)];
                if i == 0 {
                    ex.push(exec(CEP_VEHICLE, 0.0, 100, 230));
                }
                KpiReport::from_executions(ScenarioKind::Shu, &ex, &f).unwrap()
            })
            .collect();
        let m = aggregate_replications(&reps).unwrap();
        assert_relative_eq!(m.total_distance_km, 110.0);
        assert_eq!(m.replications, 3);
        assert_relative_eq!(m.vehicles.light_commercial, 4.0 / 3.0);
        assert_eq!(m.vehicles_rounded.light_commercial, 1);
        assert_eq!(aggregate_replications(&reps[..1]).unwrap(), reps[0]);
        let same = aggregate_replications(&[reps[1].clone(), reps[1].clone()]).unwrap();
        assert_relative_eq!(same.total_distance_km, reps[1].total_distance_km);
        assert_eq!(same.vehicles, reps[1].vehicles);
        let mut other = reps[0].clone();
        other.scenario = ScenarioKind::Bc;
        assert!(aggregate_replications(&[reps[0].clone(), other]).is_err());
        assert!(aggregate_replications::<f64>(&[]).is_err());
        assert_eq!(round_half_up(2.5), 3);
        assert_eq!(round_half_up(2.49), 2);
    }

    #[test]
    fn compare_percentages() {
        let f = EmissionFactors::default();
        let mk = |t: f64| {
            // co2 in tonnes from light-commercial km
            let km = t * 1e6 / 197.295;
            KpiReport::from_executions(ScenarioKind::Bc, &[exec(CEP_VEHICLE, km * 1000.0, 1, 230)], &f).unwrap()
        };
        let c = compare(&mk(55.24), &mk(38.28));
        let pct = c.get("co2_total_t").unwrap().pct.unwrap();
        assert!((pct - -30.7).abs() < 0.05, "{pct}");
        let same = compare(&mk(1.0), &mk(1.0));
        assert!(same.deltas.iter().all(|d| d.delta == 0.0 || d.delta.is_nan()));
        assert_eq!(same.get("co2_truck_t").unwrap().pct, None);
    }

    #[test]
    fn comparison_csv_header() {
        let mut buf = Vec::new();
        write_comparison::<f64, _>(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().trim_end(),
            "scenario,total_km,ground_km,shuttle_km,bike_km,avg_ground_load,co2_cep_t,co2_truck_t,co2_total_t"
        );
    }

    #[test]
    fn works_in_f32() {
        let e = TourExecution::<f32> {
            tour_id: "t".into(),
            vehicle_type: CEP_VEHICLE.into(),
            mode: Mode::Road,
            start_location: "a".into(),
            start: 0.0,
            end: 1.0,
            meters: 1e6,
            seconds: 1.0,
            initial_load: 0,
            capacity: 230,
            activities: vec![],
            traversals: vec![],
        };
        let t = emissions(&[e], &EmissionFactors::default()).unwrap();
        assert!((t.light_commercial - 0.197295).abs() < 1e-6);
    }
}
