//! Encodes the forward 0.5 m/s command and dumps the bytes, then decodes a
//! few malformed datagrams.
//!
//! `cargo run --example wire_format`

use fogservo::nodes::wire::{decode, encode, Packet, Payload};

fn main() {
    let p = Packet { seq: 7, send_ts: 1_000_000, payload: Payload::Velocity { forward: 0.5, yaw: 0.0 } };
    let bytes = encode(&p);
    let hex: Vec<String> = bytes.iter().map(|b| format!("{b:02x}")).collect();
    println!("{} bytes: {}", bytes.len(), hex.join(" "));
    println!("decoded: {:?}", decode(&bytes));

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    let mut wrong_len = bytes.clone();
    wrong_len.push(0);
    for (label, b) in [("truncated", &bytes[..10]), ("bad magic", &bad_magic[..]), ("extra byte", &wrong_len[..])] {
        println!("{label}: {:?}", decode(b));
    }
}
