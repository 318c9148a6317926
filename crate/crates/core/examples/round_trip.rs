use crfountain::coding::{CodingDistribution, Encoder, HeaderForm};
use crfountain::decoders::{decode_all_blocks, plan_uniform, Algorithm};
use crfountain::gf2::BitVector;
use crfountain::rng::rng_from_seed;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let message = BitVector::from_bytes_lsb(64, b"8 bytes!");
    let mut enc = Encoder::new(&message, 4, CodingDistribution::Uniform, HeaderForm::Dense, 1)?;
    let packets = enc.take(40);
    let plan = plan_uniform(16, 2, 6)?;
    let out = decode_all_blocks(&packets, &plan, Algorithm::Exhaustive, &mut rng_from_seed(0))?;
    assert_eq!(out.blocks(), Some(enc.blocks()));
    Ok(())
}
