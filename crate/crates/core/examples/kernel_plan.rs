//! Prints the qubit split, counter masks and nonzero entries that the kernel
//! planner derives for a gate, then applies it and compares with the
//! reference loop.
//!
//! ```text
//! cargo run --example kernel_plan -- [n] [s] [target ...]
//! ```

use qfuse::circuit::named_gate;
use qfuse::kernel::{apply_kernel, plan_kernel, reference_apply};
use qfuse::sim::compare_states;
use qfuse::{Statevector, Tolerances};

fn main() -> qfuse::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("integer argument"))
        .collect();
    let n = args.first().copied().unwrap_or(6);
    let s = args.get(1).copied().unwrap_or(2);
    let targets = if args.len() > 2 {
        args[2..].to_vec()
    } else {
        vec![1, 4]
    };

    let g = match targets.len() {
        1 => named_gate("h", &[], &targets)?,
        2 => named_gate("cx", &[], &targets)?,
        _ => named_gate("ccx", &[], &targets[..3])?,
    };
    let plan = plan_kernel(&g, n, s, Tolerances::default(), false)?;
    let split = plan.split();
    println!("targets {:?}, n = {n}, s = {s}", g.targets());
    println!("  lanes {:?}", split.lanes);
    println!("  lower {:?}, higher {:?}", split.lower, split.higher);
    for (i, m) in plan.mask_table().masks.iter().enumerate() {
        println!("  mask {i}: {m:#0w$b}", w = plan.mask_table().t_bits + 2);
    }
    println!("  {} loop iterations", plan.t_count());
    println!("  first group {:?}", plan.group_indices(0));
    for e in plan.entry_ops() {
        println!(
            "  m[{}][{}] = {:+.3}{:+.3}i ({:?}, {:?})",
            e.row, e.col, e.re, e.im, e.re_kind, e.im_kind
        );
    }

    let mut a = Statevector::<f64>::basis(n, 0b10)?;
    let mut b = a.clone();
    apply_kernel(&plan, &mut a, None, 0, plan.t_count())?;
    reference_apply(&g, &mut b)?;
    println!(
        "max deviation from reference {:.2e}",
        compare_states(&a, &b)?
    );
    Ok(())
}
