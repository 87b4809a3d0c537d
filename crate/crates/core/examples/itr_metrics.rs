//! Bits per selection and bits per minute for three commands, under the
//! stimulation-time base and a compute-time base.

use ssvep_ensemble::metrics::{bits_per_trial, itr_for, TimeBase};

fn main() -> anyhow::Result<()> {
    let stimulation = TimeBase::Stimulation { seconds: 5.0 };
    let compute = TimeBase::Compute {
        seconds_per_classification: 0.386,
    };
    println!(
        "time bases: {} | {}",
        stimulation.describe(),
        compute.describe()
    );
    println!(
        "{:>8} {:>10} {:>14} {:>14}",
        "P", "bits", "stim bits/min", "compute b/min"
    );
    for p in [1.0 / 3.0, 0.5, 0.6, 0.7, 0.77, 0.8, 0.9, 1.0] {
        println!(
            "{p:>8.3} {:>10.4} {:>14.3} {:>14.3}",
            bits_per_trial(p, 3)?,
            itr_for(p, 3, &stimulation)?,
            itr_for(p, 3, &compute)?
        );
    }
    // which per-classification time makes P = 0.8 worth 103 bits/min?
    let seconds = 60.0 * bits_per_trial(0.8, 3)? / 103.0;
    println!("\n103 bits/min at P = 0.8 needs {seconds:.3} s per classification");
    Ok(())
}
