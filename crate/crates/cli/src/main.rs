use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use locsub::mesh::{generate_voxel_sphere, load_gmsh_ascii, parse_conductivity_map, split_hex_to_tet, write_gmsh_ascii, ElementKind, Mesh, MeshDump, SphereModel};
use locsub::study::{self, StudyConfig, StudyOutput};
use locsub::{Error, Result};

#[derive(Parser)]
#[command(name = "locsub", version, about = "EEG/MEG forward simulation studies on sphere models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relative error against the analytic solution over an eccentricity sweep.
    SphereStudy(StudyArgs),
    /// Error for several vertex-extension counts and full subtraction.
    ExtensionStudy(StudyArgs),
    /// Quadrature error on single-element fixtures.
    IntegrationStudy(StudyArgs),
    /// Source assembly plus transfer application time, localized vs full.
    TimingStudy(StudyArgs),
    /// Mesh utilities.
    #[command(subcommand)]
    Mesh(MeshCommand),
}

#[derive(Args)]
struct StudyArgs {
    /// JSON study configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV; sidecars are written next to it. Defaults to the config's
    /// `output`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Write a voxel sphere as a JSON dump (`.json`) or Gmsh file (`.msh`, tetrahedra only).
    Gen {
        /// Voxel edge length in mm.
        #[arg(long, default_value_t = 4.0)]
        h: f64,
        #[arg(long, value_enum, default_value_t = Kind::Hex)]
        element: Kind,
        /// JSON sphere model; the four-layer default otherwise.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print element counts, volumes per region and the bounding box.
    Info {
        path: PathBuf,
        /// JSON map from region tag to conductivity, for Gmsh files.
        #[arg(long)]
        conductivities: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Kind {
    Hex,
    Tet,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn load_config(args: &StudyArgs) -> Result<StudyConfig> {
    let mut value: serde_json::Value = match &args.config {
        Some(p) => serde_json::from_str(&read(p)?)?,
        None => serde_json::json!({}),
    };
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Config("configuration must be a JSON object".into()))?;
    if let Some(s) = args.seed {
        obj.insert("seed".into(), s.into());
    }
    if let Some(t) = args.threads {
        obj.insert("threads".into(), t.into());
    }
    if !obj.contains_key("seed") {
        return Err(Error::Config("a seed is required (config `seed` or --seed)".into()));
    }
    StudyConfig::from_json(&value.to_string())
}

fn run_study(args: &StudyArgs, f: fn(&StudyConfig) -> Result<StudyOutput>) -> Result<()> {
    let config = load_config(args)?;
    if let Some(n) = config.threads {
        locsub::parallel::init_threads(n);
    }
    let out = f(&config)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    match args.out.clone().or(config.output.clone()) {
        Some(path) => {
            for p in out.write(&path)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => {
            print!("{}", out.csv);
            eprint!("{}", out.summary_csv);
        }
    }
    Ok(())
}

fn load_mesh(path: &Path, conductivities: Option<&Path>) -> Result<Mesh> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("msh") => {
            let map = match conductivities {
                Some(c) => parse_conductivity_map(&read(c)?)?,
                None => {
                    let m = SphereModel::default();
                    (0..4)
                        .map(|i| (i as i32 + 1, nalgebra::Matrix3::identity() * m.layer_conductivities[i]))
                        .collect()
                }
            };
            load_gmsh_ascii(path, &map)
        }
        _ => {
            let dump: MeshDump = serde_json::from_str(&read(path)?)?;
            Mesh::from_dump(dump)
        }
    }
}

fn mesh_command(cmd: &MeshCommand) -> Result<()> {
    match cmd {
        MeshCommand::Gen { h, element, model, out } => {
            let model: SphereModel = match model {
                Some(p) => serde_json::from_str(&read(p)?)?,
                None => SphereModel::default(),
            };
            let mut mesh = generate_voxel_sphere(&model, *h)?;
            if let Kind::Tet = element {
                mesh = split_hex_to_tet(&mesh)?;
            }
            let text = match out.extension().and_then(|e| e.to_str()) {
                Some("msh") => write_gmsh_ascii(&mesh)?,
                _ => serde_json::to_string(&mesh.to_dump())?,
            };
            std::fs::write(out, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", out.display())))?;
            eprintln!(
                "wrote {} ({} vertices, {} elements)",
                out.display(),
                mesh.num_vertices(),
                mesh.num_elements()
            );
            Ok(())
        }
        MeshCommand::Info { path, conductivities } => {
            let mesh = load_mesh(path, conductivities.as_deref())?;
            let kind = match mesh.kind() {
                ElementKind::Tet => "tet",
                ElementKind::Hex => "hex",
            };
            println!("kind {kind}");
            println!("vertices {}", mesh.num_vertices());
            println!("elements {}", mesh.num_elements());
            let mut vols: Vec<_> = mesh.volume_by_label().into_iter().collect();
            vols.sort_by_key(|(l, _)| *l);
            for (l, v) in vols {
                println!("volume[{l}] {:.6e} m^3", v);
            }
            let (lo, hi) = mesh.bounding_box();
            println!("bbox [{:.6e}, {:.6e}, {:.6e}] .. [{:.6e}, {:.6e}, {:.6e}]", lo.x, lo.y, lo.z, hi.x, hi.y, hi.z);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SphereStudy(a) => run_study(a, study::run_sphere_study),
        Command::ExtensionStudy(a) => run_study(a, study::run_extension_study),
        Command::IntegrationStudy(a) => run_study(a, study::run_integration_study),
        Command::TimingStudy(a) => run_study(a, study::run_timing_study),
        Command::Mesh(m) => mesh_command(m),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
