//! Transverse-mode rasters for the three bases: vortex (Z), angle (X) and
//! third-basis (XZ) modes, as intensity and phase images.
//!
//! The Z eigenstates map to Laguerre-Gauss modes LG_{p=0,ℓ} at the waist
//! plane, amplitude ∝ r^{|ℓ|} e^{−r²/w²} e^{iℓφ} with a single fixed waist
//! (w = 1 in grid units) and the symmetric OAM mapping
//! ℓ ∈ {−⌊d/2⌋, …, ⌈d/2⌉−1}. X and XZ modes are the corresponding
//! eigenvector superpositions of those fields. Grids are cell-centered, so
//! the phase singularity at the origin is never sampled.
//!
//! Intensity renders to a grayscale ramp, phase to a cyclic HSV hue wheel;
//! both palettes are fixed in code so outputs are bit-exact across runs.

use std::f64::consts::TAU;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{QkdError, Result};
use crate::exec;
use crate::pauli::{self, BasisId};

/// Raster geometry: width × height samples covering [−extent, extent]² in
/// waist units, cell-centered.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    /// Physical half-width in waist units.
    pub extent: f64,
}

impl GridSpec {
    pub fn new(width: usize, height: usize, extent: f64) -> Result<Self> {
        if width < 2 || height < 2 || !extent.is_finite() || extent <= 0.0 {
            return Err(QkdError::InvalidParameter(format!(
                "bad grid: {width}x{height}, extent {extent}"
            )));
        }
        Ok(GridSpec {
            width,
            height,
            extent,
        })
    }

    pub fn square(side: usize, extent: f64) -> Result<Self> {
        Self::new(side, side, extent)
    }

    /// Physical coordinates of the pixel center at (row, col); y grows
    /// upward, rows run downward.
    fn coords(&self, row: usize, col: usize) -> (f64, f64) {
        let dx = 2.0 * self.extent / self.width as f64;
        let dy = 2.0 * self.extent / self.height as f64;
        let x = -self.extent + (col as f64 + 0.5) * dx;
        let y = self.extent - (row as f64 + 0.5) * dy;
        (x, y)
    }

    fn cell_area(&self) -> f64 {
        (2.0 * self.extent / self.width as f64) * (2.0 * self.extent / self.height as f64)
    }
}

/// A sampled complex transverse field.
#[derive(Debug, Clone)]
pub struct ModeField {
    pub grid: GridSpec,
    pub d: usize,
    pub basis_id: BasisId,
    pub index: usize,
    samples: Vec<Complex64>,
}

impl ModeField {
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sample(&self, row: usize, col: usize) -> Complex64 {
        self.samples[row * self.grid.width + col]
    }

    /// Discretized L2 norm √(Σ|f|²·dA).
    pub fn grid_norm(&self) -> f64 {
        (self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    /// Discretized inner product ⟨self, other⟩ = Σ conj(f)·g·dA.
    pub fn inner_product(&self, other: &ModeField) -> Result<Complex64> {
        if self.samples.len() != other.samples.len() {
            return Err(QkdError::DimensionMismatch {
                expected: self.samples.len(),
                found: other.samples.len(),
            });
        }
        let dot: Complex64 = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(dot * self.grid.cell_area())
    }

    /// Peak of |f|² over the grid.
    pub fn peak_intensity(&self) -> f64 {
        self.samples
            .iter()
            .map(|z| z.norm_sqr())
            .fold(0.0, f64::max)
    }

    /// |f|² averaged over the four pixels closest to the origin.
    pub fn center_intensity(&self) -> f64 {
        let (w, h) = (self.grid.width, self.grid.height);
        let rows = [h / 2 - 1, h / 2];
        let cols = [w / 2 - 1, w / 2];
        let mut acc = 0.0;
        for &r in &rows {
            for &c in &cols {
                acc += self.sample(r, c).norm_sqr();
            }
        }
        acc / 4.0
    }

    /// Net phase winding (in turns) around a centered circle of radius r.
    pub fn winding_number(&self, radius: f64) -> i64 {
        let steps = 720;
        let mut total = 0.0;
        let mut prev = self.sample_at(radius, 0.0).arg();
        for i in 1..=steps {
            let phi = TAU * i as f64 / steps as f64;
            let cur = self.sample_at(radius * phi.cos(), radius * phi.sin()).arg();
            let mut delta = cur - prev;
            while delta > std::f64::consts::PI {
                delta -= TAU;
            }
            while delta < -std::f64::consts::PI {
                delta += TAU;
            }
            total += delta;
            prev = cur;
        }
        (total / TAU).round() as i64
    }

    /// Nearest-pixel lookup at physical coordinates.
    fn sample_at(&self, x: f64, y: f64) -> Complex64 {
        let dx = 2.0 * self.grid.extent / self.grid.width as f64;
        let dy = 2.0 * self.grid.extent / self.grid.height as f64;
        let col = (((x + self.grid.extent) / dx - 0.5).round() as i64)
            .clamp(0, self.grid.width as i64 - 1) as usize;
        let row = (((self.grid.extent - y) / dy - 0.5).round() as i64)
            .clamp(0, self.grid.height as i64 - 1) as usize;
        self.sample(row, col)
    }

    /// Width (radians) of the smallest angular sector holding `fraction` of
    /// the total intensity; quantifies the angular localization of a mode.
    pub fn angular_sector_width(&self, fraction: f64) -> f64 {
        const BINS: usize = 720;
        let mut hist = vec![0.0f64; BINS];
        let mut total = 0.0;
        for row in 0..self.grid.height {
            for col in 0..self.grid.width {
                let (x, y) = self.grid.coords(row, col);
                let w = self.sample(row, col).norm_sqr();
                if w == 0.0 {
                    continue;
                }
                let mut phi = y.atan2(x);
                if phi < 0.0 {
                    phi += TAU;
                }
                let bin = ((phi / TAU * BINS as f64) as usize).min(BINS - 1);
                hist[bin] += w;
                total += w;
            }
        }
        let target = fraction * total;
        let mut best = BINS;
        let mut sum = 0.0;
        let mut left = 0usize;
        // Sliding window over the circular histogram, unrolled to 2·BINS.
        for right in 0..2 * BINS {
            sum += hist[right % BINS];
            while sum - hist[left % BINS] >= target && left < right {
                sum -= hist[left % BINS];
                left += 1;
            }
            if sum >= target {
                best = best.min(right - left + 1);
            }
        }
        best as f64 / BINS as f64 * TAU
    }
}

fn oam_of_index(d: usize, index: usize) -> i64 {
    index as i64 - (d / 2) as i64
}

/// Laguerre-Gauss mode LG_{0,ℓ} for the OAM value mapped from `ell_index`,
/// normalized to unit L2 norm on the grid.
pub fn vortex_mode(d: usize, ell_index: usize, grid: &GridSpec) -> Result<ModeField> {
    if d < 2 {
        return Err(QkdError::InvalidDimension(d));
    }
    if ell_index >= d {
        return Err(QkdError::InvalidParameter(format!(
            "mode index {ell_index} outside [0, {d})"
        )));
    }
    let ell = oam_of_index(d, ell_index);
    let abs_ell = ell.unsigned_abs() as i32;
    let mut samples = Vec::with_capacity(grid.width * grid.height);
    for row in 0..grid.height {
        for col in 0..grid.width {
            let (x, y) = grid.coords(row, col);
            let r2 = x * x + y * y;
            let amp = r2.sqrt().powi(abs_ell) * (-r2).exp();
            let phase = ell as f64 * y.atan2(x);
            samples.push(Complex64::from_polar(amp, phase));
        }
    }
    let mut field = ModeField {
        grid: *grid,
        d,
        basis_id: BasisId::Z,
        index: ell_index,
        samples,
    };
    let norm = field.grid_norm();
    if norm == 0.0 {
        return Err(QkdError::InvalidParameter(
            "field vanished on the grid; extent too small".into(),
        ));
    }
    for z in &mut field.samples {
        *z /= norm;
    }
    Ok(field)
}

/// Superposition mode for the X or XZ basis: Σ_m c_m · LG_{0,ℓ(m)} with
/// coefficients from the j-th eigenvector expressed in the Z basis.
pub fn superposition_mode(
    d: usize,
    basis_id: BasisId,
    j: usize,
    grid: &GridSpec,
) -> Result<ModeField> {
    if basis_id == BasisId::Z {
        return vortex_mode(d, j, grid);
    }
    let basis = pauli::mub_eigenbasis(d, basis_id)?;
    if j >= d {
        return Err(QkdError::InvalidParameter(format!(
            "mode index {j} outside [0, {d})"
        )));
    }
    let coeff = basis.vector(j);
    let vortices: Vec<ModeField> = (0..d).map(|m| vortex_mode(d, m, grid)).collect::<Result<_>>()?;
    Ok(superpose(&vortices, coeff.as_slice(), basis_id, j))
}

/// All d modes of one basis on a shared grid, synthesizing the underlying
/// vortex set only once.
pub fn basis_mode_set(d: usize, basis_id: BasisId, grid: &GridSpec) -> Result<Vec<ModeField>> {
    let vortices: Vec<ModeField> = (0..d).map(|m| vortex_mode(d, m, grid)).collect::<Result<_>>()?;
    if basis_id == BasisId::Z {
        return Ok(vortices);
    }
    let basis = pauli::mub_eigenbasis(d, basis_id)?;
    Ok((0..d)
        .map(|j| superpose(&vortices, basis.vector(j).as_slice(), basis_id, j))
        .collect())
}

fn superpose(vortices: &[ModeField], coeff: &[Complex64], basis_id: BasisId, j: usize) -> ModeField {
    let grid = vortices[0].grid;
    let d = vortices[0].d;
    let mut samples = vec![Complex64::new(0.0, 0.0); grid.width * grid.height];
    for (c, v) in coeff.iter().zip(vortices) {
        for (acc, z) in samples.iter_mut().zip(&v.samples) {
            *acc += c * z;
        }
    }
    ModeField {
        grid,
        d,
        basis_id,
        index: j,
        samples,
    }
}

/// What to rasterize from a complex field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderKind {
    Intensity,
    Phase,
}

impl RenderKind {
    pub fn label(self) -> &'static str {
        match self {
            RenderKind::Intensity => "intensity",
            RenderKind::Phase => "phase",
        }
    }
}

fn hsv_to_rgb(h: f64) -> [u8; 3] {
    // Full-saturation hue wheel; h in [0, 1).
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let sector = h6 as usize % 6;
    let f = h6 - h6.floor();
    let q = ((1.0 - f) * 255.0).round() as u8;
    let t = (f * 255.0).round() as u8;
    match sector {
        0 => [255, t, 0],
        1 => [q, 255, 0],
        2 => [0, 255, t],
        3 => [0, q, 255],
        4 => [t, 0, 255],
        _ => [255, 0, q],
    }
}

/// Rasterize to fixed palettes: intensity |f|² normalized to [0, 1] on a
/// grayscale ramp, phase arg f ∈ [0, 2π) on a cyclic hue wheel.
pub fn rasterize(mode: &ModeField, kind: RenderKind) -> image::RgbImage {
    let (w, h) = (mode.grid.width as u32, mode.grid.height as u32);
    let mut img = image::RgbImage::new(w, h);
    match kind {
        RenderKind::Intensity => {
            let peak = mode.peak_intensity().max(f64::MIN_POSITIVE);
            for (row, col, px) in iter_pixels(&mut img) {
                let v = (mode.sample(row, col).norm_sqr() / peak).clamp(0.0, 1.0);
                let g = (v * 255.0).round() as u8;
                *px = image::Rgb([g, g, g]);
            }
        }
        RenderKind::Phase => {
            for (row, col, px) in iter_pixels(&mut img) {
                let mut phi = mode.sample(row, col).arg();
                if phi < 0.0 {
                    phi += TAU;
                }
                *px = image::Rgb(hsv_to_rgb(phi / TAU));
            }
        }
    }
    img
}

fn iter_pixels(
    img: &mut image::RgbImage,
) -> impl Iterator<Item = (usize, usize, &mut image::Rgb<u8>)> {
    img.enumerate_pixels_mut()
        .map(|(x, y, px)| (y as usize, x as usize, px))
}

/// Write a raster to `path`: `.png` gets the palette image, `.pgm` a binary
/// 8-bit grayscale fallback (luma of the palette).
pub fn render(mode: &ModeField, kind: RenderKind, path: &Path) -> Result<()> {
    let img = rasterize(mode, kind);
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let ctx = path.display().to_string();
    match ext.as_str() {
        "pgm" => {
            let mut data = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
            for px in img.pixels() {
                // ITU-R BT.601 luma.
                let l = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
                data.push(l.round() as u8);
            }
            std::fs::write(path, data).map_err(|e| QkdError::io(&ctx, e))
        }
        _ => img.save(path).map_err(|e| match e {
            image::ImageError::IoError(io) => QkdError::io(&ctx, io),
            other => QkdError::InvalidParameter(format!("{ctx}: {other}")),
        }),
    }
}

/// Files produced by [`render_basis_sheet`].
#[derive(Debug, Clone)]
pub struct SheetSummary {
    pub tile_paths: Vec<std::path::PathBuf>,
    pub montage_path: std::path::PathBuf,
    pub tiles: usize,
}

/// Render every mode of all three bases as intensity and phase tiles plus a
/// single montage (columns: Z/X/XZ × intensity/phase, rows: mode index).
pub fn render_basis_sheet(d: usize, grid: &GridSpec, out_dir: &Path) -> Result<SheetSummary> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| QkdError::io(out_dir.display().to_string(), e))?;

    // The vortex set is shared by all superpositions; synthesize it once,
    // then build the three basis sets in parallel.
    let sets: Vec<Result<Vec<ModeField>>> =
        exec::map_vec(BasisId::ALL.to_vec(), |basis| basis_mode_set(d, basis, grid));
    let mut modes: Vec<ModeField> = Vec::with_capacity(3 * d);
    for set in sets {
        modes.extend(set?);
    }

    let tile_w = grid.width as u32;
    let tile_h = grid.height as u32;
    let mut montage = image::RgbImage::new(6 * tile_w, d as u32 * tile_h);
    let mut tile_paths = Vec::new();
    let mut tiles = 0usize;
    for (bi, basis) in BasisId::ALL.iter().enumerate() {
        for j in 0..d {
            let mode = &modes[bi * d + j];
            for (ki, kind) in [RenderKind::Intensity, RenderKind::Phase].iter().enumerate() {
                let img = rasterize(mode, *kind);
                let name = format!(
                    "{}_{}_{}.png",
                    basis.label().to_ascii_lowercase(),
                    j,
                    kind.label()
                );
                let path = out_dir.join(name);
                img.save(&path).map_err(|e| {
                    QkdError::InvalidParameter(format!("{}: {e}", path.display()))
                })?;
                let ox = (2 * bi + ki) as u32 * tile_w;
                let oy = j as u32 * tile_h;
                for (x, y, px) in img.enumerate_pixels() {
                    montage.put_pixel(ox + x, oy + y, *px);
                }
                tile_paths.push(path);
                tiles += 1;
            }
        }
    }
    let montage_path = out_dir.join("montage.png");
    montage
        .save(&montage_path)
        .map_err(|e| QkdError::InvalidParameter(format!("{}: {e}", montage_path.display())))?;
    Ok(SheetSummary {
        tile_paths,
        montage_path,
        tiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid256() -> GridSpec {
        GridSpec::square(256, 5.0).unwrap()
    }

    #[test]
    fn gaussian_mode_peaks_at_center_with_no_winding() {
        let d = 7;
        let g = grid256();
        let ell0_index = d / 2; // maps to ℓ = 0
        let f = vortex_mode(d, ell0_index, &g).unwrap();
        assert_eq!(f.winding_number(1.0), 0);
        let peak = f.peak_intensity();
        let center = f.center_intensity();
        assert!(center > 0.95 * peak, "center {center} vs peak {peak}");
    }

    #[test]
    fn vortex_winding_matches_oam() {
        let g = grid256();
        for (idx, ell) in [(0usize, -3i64), (1, -2), (5, 2), (6, 3)] {
            let f = vortex_mode(7, idx, &g).unwrap();
            assert_eq!(f.winding_number(1.2), ell, "index {idx}");
        }
    }

    #[test]
    fn nonzero_oam_has_dark_center() {
        let g = grid256();
        for idx in [0usize, 1, 2, 4, 5, 6] {
            let f = vortex_mode(7, idx, &g).unwrap();
            assert!(
                f.center_intensity() < 0.01 * f.peak_intensity(),
                "index {idx} center too bright"
            );
        }
    }

    #[test]
    fn vortex_modes_are_grid_normalized() {
        let g = grid256();
        for idx in 0..7 {
            let f = vortex_mode(7, idx, &g).unwrap();
            assert!((f.grid_norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn superposition_norms_within_two_percent() {
        let g = grid256();
        for basis in [BasisId::X, BasisId::XZ] {
            for (j, f) in basis_mode_set(7, basis, &g).unwrap().iter().enumerate() {
                let n = f.grid_norm();
                assert!((n - 1.0).abs() < 0.02, "norm {n} at {basis} j={j}");
            }
        }
    }

    #[test]
    fn same_basis_grid_overlaps_are_kronecker() {
        let g = GridSpec::square(512, 5.0).unwrap();
        for basis in BasisId::ALL {
            let modes = basis_mode_set(7, basis, &g).unwrap();
            for i in 0..7 {
                for j in 0..7 {
                    let ov = modes[i].inner_product(&modes[j]).unwrap().norm();
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (ov - target).abs() < 0.02,
                        "overlap {ov} at {basis} ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn cross_basis_grid_overlaps_cluster_at_reciprocal_d() {
        let g = GridSpec::square(512, 5.0).unwrap();
        let d = 7;
        let zs = basis_mode_set(d, BasisId::Z, &g).unwrap();
        let xs = basis_mode_set(d, BasisId::X, &g).unwrap();
        for zi in &zs {
            for xj in &xs {
                let sq = zi.inner_product(xj).unwrap().norm_sqr();
                assert!(
                    (sq - 1.0 / d as f64).abs() < 0.05,
                    "cross overlap² {sq} not near 1/{d}"
                );
            }
        }
    }

    #[test]
    fn doubling_resolution_barely_moves_the_norm() {
        let coarse = GridSpec::square(128, 5.0).unwrap();
        let fine = GridSpec::square(256, 5.0).unwrap();
        for j in 0..7 {
            let a = superposition_mode(7, BasisId::XZ, j, &coarse).unwrap();
            let b = superposition_mode(7, BasisId::XZ, j, &fine).unwrap();
            let rel = (a.grid_norm() - b.grid_norm()).abs() / b.grid_norm();
            assert!(rel < 0.005, "norm moved {rel:.4} at j={j}");
        }
    }

    #[test]
    fn angle_modes_concentrate_in_a_sector() {
        let g = grid256();
        for (j, f) in basis_mode_set(7, BasisId::X, &g).unwrap().iter().enumerate() {
            let width = f.angular_sector_width(0.5);
            assert!(
                width < TAU / 3.0,
                "angle mode j={j} spreads over {width:.2} rad"
            );
        }
    }

    #[test]
    fn qubit_x_mode_has_single_azimuthal_lobe() {
        // d=2 Fourier vector superposes the ℓ = −1 and ℓ = 0 fields; the
        // beat pattern has exactly one angular lobe.
        let g = grid256();
        let f = superposition_mode(2, BasisId::X, 0, &g).unwrap();
        let width = f.angular_sector_width(0.5);
        assert!(width < TAU / 2.0, "lobe too wide: {width:.2}");
        // One lobe, not two: half the energy sits in a window that a
        // two-lobe pattern could not fit in.
        let f1 = superposition_mode(2, BasisId::X, 1, &g).unwrap();
        assert!((f1.angular_sector_width(0.5) - width).abs() < 0.2);
    }

    #[test]
    fn intensity_raster_is_global_phase_invariant() {
        let g = grid256();
        let f = superposition_mode(3, BasisId::XZ, 1, &g).unwrap();
        let mut rotated = f.clone();
        let phase = Complex64::from_polar(1.0, 1.234);
        for z in &mut rotated.samples {
            *z *= phase;
        }
        let a = rasterize(&f, RenderKind::Intensity);
        let b = rasterize(&rotated, RenderKind::Intensity);
        assert_eq!(a.as_raw(), b.as_raw());
    }

    #[test]
    fn phase_raster_of_unit_vortex_has_one_branch_cut() {
        let g = grid256();
        let idx_ell1 = 7 / 2 + 1;
        let f = vortex_mode(7, idx_ell1, &g).unwrap();
        let img = rasterize(&f, RenderKind::Phase);
        // Along the mid-radius circle the hue must jump exactly once.
        let mut jumps = 0;
        let mut prev: Option<i32> = None;
        let steps = 360;
        for i in 0..=steps {
            let phi = TAU * i as f64 / steps as f64;
            let x = 1.2 * phi.cos();
            let y = 1.2 * phi.sin();
            let col = ((x + g.extent) / (2.0 * g.extent) * g.width as f64) as u32;
            let row = ((g.extent - y) / (2.0 * g.extent) * g.height as f64) as u32;
            let px = img.get_pixel(col.min(g.width as u32 - 1), row.min(g.height as u32 - 1));
            let val = px[0] as i32 - px[2] as i32;
            if let Some(p) = prev {
                if (val - p).abs() > 200 {
                    jumps += 1;
                }
            }
            prev = Some(val);
        }
        assert_eq!(jumps, 1, "expected a single 0→2π discontinuity ray");
    }

    #[test]
    fn render_writes_png_and_pgm() {
        let dir = std::env::temp_dir().join(format!("qkdrates-render-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let g = GridSpec::square(64, 4.0).unwrap();
        let f = vortex_mode(3, 2, &g).unwrap();
        let png = dir.join("t.png");
        let pgm = dir.join("t.pgm");
        render(&f, RenderKind::Intensity, &png).unwrap();
        render(&f, RenderKind::Phase, &pgm).unwrap();
        assert!(png.metadata().unwrap().len() > 0);
        let head = std::fs::read(&pgm).unwrap();
        assert_eq!(&head[..2], b"P5");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn sheet_produces_all_tiles_and_montage() {
        let dir = std::env::temp_dir().join(format!("qkdrates-sheet-{}", std::process::id()));
        let g = GridSpec::square(32, 4.0).unwrap();
        let summary = render_basis_sheet(3, &g, &dir).unwrap();
        assert_eq!(summary.tiles, 18);
        let img = image::open(&summary.montage_path).unwrap();
        assert_eq!(img.width(), 6 * 32);
        assert_eq!(img.height(), 3 * 32);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn bad_grid_and_index_rejected() {
        assert!(GridSpec::square(1, 5.0).is_err());
        assert!(GridSpec::square(64, 0.0).is_err());
        let g = grid256();
        assert!(vortex_mode(7, 7, &g).is_err());
        assert!(superposition_mode(7, BasisId::X, 9, &g).is_err());
    }
}
