//! CSV export with fixed, documented header rows. Floats are written
//! with shortest-roundtrip formatting, so identical inputs produce
//! byte-identical files.

use std::io::Write;

use crate::bvp::Solution;
use crate::error::{Error, Result};
use crate::profile::BoundaryProfile;
use crate::transform::Transform;

fn io_err(e: std::io::Error) -> Error {
    Error::Unsupported(format!("write failed: {e}"))
}

/// Columns: `s, g, g_prime, h`.
pub fn write_transform_csv<W: Write>(pack: &Transform, out: &mut W) -> Result<()> {
    writeln!(out, "s,g,g_prime,h").map_err(io_err)?;
    let table = pack.g_table();
    for (&s, &g) in table.abscissae().iter().zip(table.ordinates()) {
        let gp = pack.g_prime(s)?;
        let h = pack.h(s)?;
        writeln!(out, "{s},{g},{gp},{h}").map_err(io_err)?;
        let _ = g;
    }
    Ok(())
}

/// Columns: `s, phi, phi_prime, residual` where `residual` is the
/// relative defect of `-φ'' = h(φ)` from divided second differences at
/// the interior table nodes (0 at the two end rows).
pub fn write_profile_csv<W: Write>(
    profile: &BoundaryProfile,
    pack: &Transform,
    out: &mut W,
) -> Result<()> {
    writeln!(out, "s,phi,phi_prime,residual").map_err(io_err)?;
    let table = profile.table();
    let s = table.abscissae();
    let phi = table.ordinates();
    let n = s.len();
    for i in 0..n {
        let slope = profile.slope(s[i])?;
        let residual = if i == 0 || i == n - 1 {
            0.0
        } else {
            let hm = s[i] - s[i - 1];
            let hp = s[i + 1] - s[i];
            let second = ((phi[i + 1] - phi[i]) / hp - (phi[i] - phi[i - 1]) / hm)
                / (0.5 * (hm + hp));
            let h = pack.h(phi[i])?;
            (second + h).abs() / h
        };
        writeln!(out, "{},{},{},{}", s[i], phi[i], slope, residual).map_err(io_err)?;
    }
    Ok(())
}

/// Columns: `x_or_r, d, v, u, Dv, Du, res_semilinear, res_quasilinear`
/// (`u`, `Du`, `res_quasilinear` are 0 when the solution has not been
/// completed).
pub fn write_solution_csv<W: Write>(sol: &Solution, out: &mut W) -> Result<()> {
    writeln!(out, "x_or_r,d,v,u,Dv,Du,res_semilinear,res_quasilinear").map_err(io_err)?;
    let mesh = sol.mesh.as_ref();
    let zeros = vec![0.0; mesh.nodes().len()];
    let u = sol.u.as_ref().map(|f| &f.values[..]).unwrap_or(&zeros);
    let du = sol.du.as_ref().map(|f| &f.values[..]).unwrap_or(&zeros);
    let rq = sol
        .residual_quasilinear
        .as_ref()
        .map(|f| &f.values[..])
        .unwrap_or(&zeros);
    for (i, (&x, &d)) in mesh.nodes().iter().zip(mesh.distance()).enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            x,
            d,
            sol.v.values[i],
            u[i],
            sol.dv.values[i],
            du[i],
            sol.residual_semilinear.values[i],
            rq[i]
        )
        .map_err(io_err)?;
    }
    Ok(())
}
