//! Weighted partial MaxSAT solver for classic DIMACS WCNF files.
//!
//! SAT back end: CaDiCaL (incremental, assumption-based). Optimization:
//! OLL core-guided search — solve under assumptions that all soft clauses
//! hold; on each UNSAT core, pay the minimum core weight into the lower
//! bound and relax the core through a totalizer whose outputs become new
//! reweighted assumptions. Terminates with the first satisfiable call,
//! whose lower bound is the optimum.
//!
//! Output follows MaxSAT-evaluation conventions:
//!   o <cost>            (lower bound updates, final line is the optimum)
//!   s OPTIMUM FOUND | s UNSATISFIABLE
//!   v <lit> <lit> ...   (one space-separated value line)

use std::collections::HashMap;
use std::env;
use std::fs;
use std::process::exit;

struct Instance {
    num_vars: i32,
    hard: Vec<Vec<i32>>,
    soft: Vec<(u64, Vec<i32>)>,
}

fn parse_wcnf(text: &str) -> Result<Instance, String> {
    let mut num_vars: i32 = 0;
    let mut top: Option<u64> = None;
    let mut hard = Vec::new();
    let mut soft = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 5 || parts[1] != "wcnf" {
                return Err(format!("bad header: {line}"));
            }
            num_vars = parts[2].parse().map_err(|e| format!("{e}"))?;
            top = Some(parts[4].parse().map_err(|e| format!("{e}"))?);
            continue;
        }
        let top = top.ok_or("clause before header")?;
        let mut tokens = line.split_whitespace();
        let weight: u64 = tokens
            .next()
            .ok_or("empty clause line")?
            .parse()
            .map_err(|e| format!("bad weight: {e}"))?;
        let lits: Vec<i32> = tokens
            .map(|t| t.parse().map_err(|e| format!("bad literal: {e}")))
            .collect::<Result<_, String>>()?;
        if lits.last() != Some(&0) {
            return Err(format!("clause not zero-terminated: {line}"));
        }
        let lits: Vec<i32> = lits[..lits.len() - 1].to_vec();
        if lits.is_empty() {
            return Err("empty clause".into());
        }
        if weight >= top {
            hard.push(lits);
        } else {
            soft.push((weight, lits));
        }
    }
    if top.is_none() {
        return Err("missing header".into());
    }
    Ok(Instance { num_vars, hard, soft })
}

/// Build totalizer outputs o_1..o_m over the input literals: at least j
/// inputs true forces o_j true (the direction OLL needs for its `-o_j`
/// assumptions).
fn totalizer(inputs: &[i32], next_var: &mut i32, solver: &mut cadical::Solver) -> Vec<i32> {
    if inputs.len() == 1 {
        return vec![inputs[0]];
    }
    let (a, b) = inputs.split_at(inputs.len() / 2);
    let av = totalizer(a, next_var, solver);
    let bv = totalizer(b, next_var, solver);
    let outs: Vec<i32> = (0..av.len() + bv.len())
        .map(|_| {
            *next_var += 1;
            *next_var
        })
        .collect();
    for i in 0..=av.len() {
        for j in 0..=bv.len() {
            let k = i + j;
            if k == 0 {
                continue;
            }
            let mut clause = Vec::with_capacity(3);
            if i > 0 {
                clause.push(-av[i - 1]);
            }
            if j > 0 {
                clause.push(-bv[j - 1]);
            }
            clause.push(outs[k - 1]);
            solver.add_clause(clause);
        }
    }
    outs
}

#[derive(Clone, Copy)]
struct TotOut {
    tot: usize,
    bound: usize, // assumption lit is -(outputs[bound-1])
}

fn main() {
    let args: Vec<String> = env::args().collect();
    if args.len() != 2 {
        eprintln!("usage: wcnf-oll <instance.wcnf>");
        exit(2);
    }
    let text = match fs::read_to_string(&args[1]) {
        Ok(t) => t,
        Err(e) => {
            println!("c cannot read {}: {e}", args[1]);
            println!("s UNKNOWN");
            exit(1);
        }
    };
    let inst = match parse_wcnf(&text) {
        Ok(i) => i,
        Err(e) => {
            println!("c parse error: {e}");
            println!("s UNKNOWN");
            exit(1);
        }
    };

    let mut solver: cadical::Solver = cadical::Solver::new();
    let mut next_var = inst.num_vars.max(
        inst.hard
            .iter()
            .chain(inst.soft.iter().map(|(_, c)| c))
            .flat_map(|c| c.iter().map(|l| l.abs()))
            .max()
            .unwrap_or(0),
    );
    for clause in &inst.hard {
        solver.add_clause(clause.iter().copied());
    }

    // assumption literal -> remaining weight
    let mut weights: HashMap<i32, u64> = HashMap::new();
    // assumption literals that are totalizer outputs
    let mut origins: HashMap<i32, TotOut> = HashMap::new();
    let mut totalizers: Vec<Vec<i32>> = Vec::new();
    for (w, clause) in &inst.soft {
        let assump = if clause.len() == 1 {
            clause[0]
        } else {
            next_var += 1;
            let r = next_var;
            let mut relaxed = clause.clone();
            relaxed.push(r);
            solver.add_clause(relaxed);
            -r
        };
        *weights.entry(assump).or_insert(0) += w;
    }

    let mut lower_bound: u64 = 0;
    loop {
        let mut assumps: Vec<i32> = weights.keys().copied().collect();
        assumps.sort_unstable(); // deterministic order
        match solver.solve_with(assumps.iter().copied()) {
            Some(true) => {
                println!("o {lower_bound}");
                println!("s OPTIMUM FOUND");
                let vals: Vec<String> = (1..=inst.num_vars)
                    .map(|v| {
                        let value = solver.value(v).unwrap_or(false);
                        if value { v.to_string() } else { (-v).to_string() }
                    })
                    .collect();
                println!("v {}", vals.join(" "));
                return;
            }
            Some(false) => {
                let core: Vec<i32> = assumps
                    .iter()
                    .copied()
                    .filter(|&l| solver.failed(l))
                    .collect();
                if core.is_empty() {
                    println!("s UNSATISFIABLE");
                    return;
                }
                let w_min = core.iter().map(|l| weights[l]).min().unwrap();
                lower_bound += w_min;
                println!("o {lower_bound}");
                let mut bumps: Vec<(i32, u64)> = Vec::new();
                for &lit in &core {
                    let w = weights.get_mut(&lit).unwrap();
                    *w -= w_min;
                    if *w == 0 {
                        weights.remove(&lit);
                    }
                    // a violated totalizer bound exposes the next bound
                    if let Some(&TotOut { tot, bound }) = origins.get(&lit) {
                        let outs = &totalizers[tot];
                        if bound < outs.len() {
                            let next_assump = -outs[bound];
                            origins.insert(next_assump, TotOut { tot, bound: bound + 1 });
                            bumps.push((next_assump, w_min));
                        }
                    }
                }
                if core.len() > 1 {
                    // count violations of the core's softs; allow one for free
                    let violated: Vec<i32> = core.iter().map(|&l| -l).collect();
                    let outs = totalizer(&violated, &mut next_var, &mut solver);
                    let tot = totalizers.len();
                    let assump = -outs[1];
                    origins.insert(assump, TotOut { tot, bound: 2 });
                    totalizers.push(outs);
                    bumps.push((assump, w_min));
                }
                for (lit, w) in bumps {
                    *weights.entry(lit).or_insert(0) += w;
                }
            }
            None => {
                println!("s UNKNOWN");
                exit(1);
            }
        }
    }
}
