//! Build an instruction set by asking a generator to paraphrase the base
//! instruction. The published transcript is replayed, so this runs offline
//! and yields the bundled ten-instruction set.

use std::path::Path;
use std::sync::Arc;

use genqr::reformulate::paraphrase_instructions;
use genqr::{Generator, InstructionSet, ReformulationConfig, ReplayBackend};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let transcript = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/published_transcript.jsonl");
    let generator = Generator::new(Arc::new(ReplayBackend::load(transcript)?));
    let base = InstructionSet::bundled().base().to_string();

    let set = paraphrase_instructions(&generator, &base, 10, &ReformulationConfig::default())?;
    for (i, ins) in set.all().iter().enumerate() {
        println!("{:>2}. {ins}", i + 1);
    }
    assert_eq!(set, InstructionSet::bundled());

    // Smaller ensembles are prefixes of the full set.
    println!("\nN=3: {:?}", set.take(3)?.all());
    Ok(())
}
