use blockplan::plan_all;

#[test]
fn dump_slots() {
    let manifests: Vec<_> = toydb::instr::BINARIES
        .iter()
        .map(|b| blockplan::parse_manifest(toydb::instr::manifest_text(b)).unwrap())
        .collect();
    let (assignments, layout) = plan_all(&manifests).unwrap();
    for a in &assignments {
        let entry = layout.window(&a.binary_id).unwrap();
        for slot in 0..a.len() as u32 {
            let b = a.block_at(slot).unwrap();
            println!("SLOT {} {}:{}:{}", entry.offset + u64::from(slot), b.binary, b.function, b.index);
        }
    }
}
