use clap::Parser;

fn main() {
    let cli = lab::Cli::parse();
    match lab::run(&cli) {
        Ok(lines) => lines.iter().for_each(|l| println!("{l}")),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(lab::exit_code(&err));
        }
    }
}
