//! Minimal classifier adapter speaking the wire protocol: label 1 when the
//! first coordinate is non-negative. Serves stdio, or TCP with `--listen`.

use std::io;
use std::net::TcpListener;

use clap::Parser;

use recert::classifier::wire::{serve, sign_of_first_coordinate, ServerInfo};

#[derive(Parser)]
struct Args {
    /// Address to accept TCP connections on, one thread per connection.
    #[arg(long)]
    listen: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
}

fn main() -> io::Result<()> {
    let args = Args::parse();
    let info = ServerInfo {
        label_count: 2,
        model: "sign-of-first-coordinate".into(),
        dim: args.dim,
    };
    let Some(addr) = args.listen else {
        return serve(io::stdin().lock(), io::stdout().lock(), &info, sign_of_first_coordinate);
    };
    let listener = TcpListener::bind(&addr)?;
    eprintln!("listening on {}", listener.local_addr()?);
    for stream in listener.incoming() {
        let stream = stream?;
        let info = info.clone();
        std::thread::spawn(move || {
            let reader = stream.try_clone()?;
            serve(reader, stream, &info, sign_of_first_coordinate)
        });
    }
    Ok(())
}
