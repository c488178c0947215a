//! C interface to the design toolkit.
//!
//! Objects are opaque and owned by the caller once returned; release them
//! with the matching `*_free` function. Every fallible call returns an
//! [`MtStatus`]; the message for the last failure on the calling thread is
//! available from [`mt_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use modtransit::assignment::{solve_assignment, AssignmentProblem, Backend};
use modtransit::benders::{run_classic, run_enhanced, run_monolith, BendersConfig, BendersContext, BendersRun, BendersStatus};
use modtransit::cli::FileConfig;
use modtransit::design::{DesignConfig, DesignDecision};
use modtransit::network::{load_network, MultimodalNetwork, NetworkFiles};
use modtransit::synthetic::toy_instances;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    SolverError = 4,
    /// The solve stopped at a time or iteration limit; results are valid
    /// but not proven optimal.
    LimitReached = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtMethod {
    Monolith = 0,
    Classic = 1,
    Enhanced = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MtRunSummary {
    pub optimal: bool,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub gap_percent: f64,
    pub iterations: usize,
    pub wall_time: f64,
}

/// A network with its design and solver settings.
pub struct MtNetwork {
    net: MultimodalNetwork,
    cfg: DesignConfig,
    benders: BendersConfig,
}

/// Result of a design solve.
pub struct MtRun {
    run: BendersRun,
    cfg: DesignConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn guard(f: impl FnOnce() -> Result<MtStatus, (MtStatus, String)>) -> MtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            MtStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, (MtStatus, String)> {
    if p.is_null() {
        return Err((MtStatus::NullPointer, format!("{what} is null")));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (MtStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(Path::new(s))
}

fn data<E: std::fmt::Display>(e: E) -> (MtStatus, String) {
    (MtStatus::DataError, e.to_string())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads the four CSV tables in `dir`. `config` may be null for the default
/// settings, or name a TOML/JSON file with `[design]` and `[benders]` tables.
///
/// # Safety
/// `dir` and `config` must be null or NUL-terminated strings; `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mt_network_load(dir: *const c_char, config: *const c_char, out: *mut *mut MtNetwork) -> MtStatus {
    guard(|| {
        if out.is_null() {
            return Err((MtStatus::NullPointer, "out is null".into()));
        }
        let dir = path_arg(dir, "dir")?;
        let file = if config.is_null() {
            FileConfig::default()
        } else {
            FileConfig::load(path_arg(config, "config")?).map_err(data)?
        };
        file.design.validate().map_err(data)?;
        let net = load_network(&NetworkFiles::in_dir(dir))
            .map_err(data)?
            .build_walking_links(file.design.walk_distance, file.design.walk_speed_mph, None)
            .with_fares(&file.design.fares());
        *out = Box::into_raw(Box::new(MtNetwork {
            net,
            cfg: file.design,
            benders: file.benders,
        }));
        Ok(MtStatus::Ok)
    })
}

/// One of the built-in toy instances (`index` 0 to 2).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mt_network_toy(index: u32, out: *mut *mut MtNetwork) -> MtStatus {
    guard(|| {
        if out.is_null() {
            return Err((MtStatus::NullPointer, "out is null".into()));
        }
        let inst = toy_instances()
            .into_iter()
            .nth(index as usize)
            .ok_or((MtStatus::InvalidArgument, format!("no toy instance {index}")))?;
        *out = Box::into_raw(Box::new(MtNetwork {
            net: inst.net,
            cfg: inst.config,
            benders: BendersConfig::default(),
        }));
        Ok(MtStatus::Ok)
    })
}

/// # Safety
/// `net` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mt_network_free(net: *mut MtNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Writes element counts; any output pointer may be null.
///
/// # Safety
/// `net` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn mt_network_counts(
    net: *const MtNetwork,
    nodes: *mut usize,
    links: *mut usize,
    lines: *mut usize,
    zones: *mut usize,
) -> MtStatus {
    guard(|| {
        let n = net.as_ref().ok_or((MtStatus::NullPointer, "net is null".into()))?;
        for (p, v) in [
            (nodes, n.net.num_nodes()),
            (links, n.net.num_links()),
            (lines, n.net.lines.len()),
            (zones, n.net.zones.len()),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(MtStatus::Ok)
    })
}

/// Replaces the bus and MoD fleet budgets.
///
/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mt_network_set_budgets(net: *mut MtNetwork, buses: f64, vehicles: f64) -> MtStatus {
    guard(|| {
        let n = net.as_mut().ok_or((MtStatus::NullPointer, "net is null".into()))?;
        let mut cfg = n.cfg.clone();
        cfg.bus_budget = buses;
        cfg.fleet_budget = vehicles;
        cfg.validate().map_err(|e| (MtStatus::InvalidArgument, e.to_string()))?;
        n.cfg = cfg;
        Ok(MtStatus::Ok)
    })
}

fn menu_index(menu: &[f64], v: f64, what: &str) -> Result<usize, (MtStatus, String)> {
    menu.iter()
        .position(|&m| (m - v).abs() <= 1e-9 * (1.0 + m.abs()))
        .ok_or((MtStatus::InvalidArgument, format!("{what} {v} is not on the menu")))
}

/// Expected total travel cost of a fixed design. `frequencies` has one entry
/// per line (0 for closed), `fleets` one per zone; values must be on the
/// configured menus.
///
/// # Safety
/// `net` must be a live handle, the arrays must hold the stated number of
/// elements and `cost` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mt_assign_cost(
    net: *const MtNetwork,
    frequencies: *const f64,
    num_lines: usize,
    fleets: *const f64,
    num_zones: usize,
    cost: *mut f64,
) -> MtStatus {
    guard(|| {
        let n = net.as_ref().ok_or((MtStatus::NullPointer, "net is null".into()))?;
        if frequencies.is_null() || fleets.is_null() || cost.is_null() {
            return Err((MtStatus::NullPointer, "null array or output".into()));
        }
        if num_lines != n.net.lines.len() || num_zones != n.net.zones.len() {
            return Err((
                MtStatus::InvalidArgument,
                format!("expected {} lines and {} zones", n.net.lines.len(), n.net.zones.len()),
            ));
        }
        let freqs = std::slice::from_raw_parts(frequencies, num_lines);
        let fl = std::slice::from_raw_parts(fleets, num_zones);
        let line_freq = freqs
            .iter()
            .map(|&f| if f == 0.0 { Ok(None) } else { menu_index(&n.cfg.frequencies, f, "frequency").map(Some) })
            .collect::<Result<Vec<_>, _>>()?;
        let zone_fleet = fl
            .iter()
            .map(|&v| menu_index(&n.cfg.fleet_sizes, v, "fleet size"))
            .collect::<Result<Vec<_>, _>>()?;
        let d = DesignDecision { line_freq, zone_fleet };
        let p = AssignmentProblem::new(&n.net, &d.rates(&n.net, &n.cfg), n.cfg.value_of_time);
        let sol = solve_assignment(&p, Backend::Hyperpath).map_err(data)?;
        *cost = sol.objective;
        Ok(MtStatus::Ok)
    })
}

/// Optimizes the design. `time_limit` is in seconds; pass 0 or a negative
/// value for no limit. On `Ok` and `LimitReached` `*out` holds a run.
///
/// # Safety
/// `net` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mt_design(net: *const MtNetwork, method: MtMethod, time_limit: f64, out: *mut *mut MtRun) -> MtStatus {
    guard(|| {
        let n = net.as_ref().ok_or((MtStatus::NullPointer, "net is null".into()))?;
        if out.is_null() {
            return Err((MtStatus::NullPointer, "out is null".into()));
        }
        let mut bc = n.benders.clone();
        bc.time_limit = (time_limit > 0.0).then_some(time_limit);
        let ctx = BendersContext::new(&n.net, &n.cfg).map_err(data)?;
        let solved = match method {
            MtMethod::Monolith => run_monolith(&ctx, bc.time_limit).map(|r| r.0),
            MtMethod::Classic => run_classic(&ctx, &bc),
            MtMethod::Enhanced => run_enhanced(&ctx, &bc),
        };
        let run = solved.map_err(|e| (MtStatus::SolverError, e.to_string()))?;
        let status = if run.status == BendersStatus::Optimal {
            MtStatus::Ok
        } else {
            set_error(format!("stopped with status {:?}", run.status));
            MtStatus::LimitReached
        };
        *out = Box::into_raw(Box::new(MtRun { run, cfg: n.cfg.clone() }));
        Ok(status)
    })
}

/// # Safety
/// `run` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mt_run_free(run: *mut MtRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mt_run_summary(run: *const MtRun, out: *mut MtRunSummary) -> MtStatus {
    guard(|| {
        let r = &run.as_ref().ok_or((MtStatus::NullPointer, "run is null".into()))?.run;
        let o = out.as_mut().ok_or((MtStatus::NullPointer, "out is null".into()))?;
        *o = MtRunSummary {
            optimal: r.status == BendersStatus::Optimal,
            upper_bound: r.upper_bound,
            lower_bound: r.lower_bound,
            gap_percent: r.gap_percent(),
            iterations: r.iterations,
            wall_time: r.wall_time,
        };
        Ok(MtStatus::Ok)
    })
}

/// Frequency of line `line` in the best design, 0 when closed.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mt_run_line_frequency(run: *const MtRun, line: usize, out: *mut f64) -> MtStatus {
    guard(|| {
        let r = run.as_ref().ok_or((MtStatus::NullPointer, "run is null".into()))?;
        let o = out.as_mut().ok_or((MtStatus::NullPointer, "out is null".into()))?;
        let f = r
            .run
            .best_design
            .line_freq
            .get(line)
            .ok_or((MtStatus::InvalidArgument, format!("no line {line}")))?;
        *o = f.map_or(0.0, |i| r.cfg.frequencies[i]);
        Ok(MtStatus::Ok)
    })
}

/// MoD fleet size of zone `zone` in the best design.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mt_run_zone_fleet(run: *const MtRun, zone: usize, out: *mut f64) -> MtStatus {
    guard(|| {
        let r = run.as_ref().ok_or((MtStatus::NullPointer, "run is null".into()))?;
        let o = out.as_mut().ok_or((MtStatus::NullPointer, "out is null".into()))?;
        let n = r
            .run
            .best_design
            .zone_fleet
            .get(zone)
            .ok_or((MtStatus::InvalidArgument, format!("no zone {zone}")))?;
        *o = r.cfg.fleet_sizes[*n];
        Ok(MtStatus::Ok)
    })
}
