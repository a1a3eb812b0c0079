//! Hand-written SVG charts: one linear plot, one log-scale plot.

use kpp_front::plot::{plot_svg, PlotStyle, Series};

fn main() -> kpp_front::Result<()> {
    let dir = std::env::temp_dir();
    let logistic: Vec<(f64, f64)> = (0..=80)
        .map(|k| {
            let t = -8.0 + 0.2 * k as f64;
            (t, t.exp() / (1.0 + t.exp()))
        })
        .collect();
    let style = PlotStyle {
        title: "logistic profile".into(),
        x_label: "t".into(),
        y_label: "phi".into(),
        ..Default::default()
    };
    let path = dir.join("logistic.svg");
    std::fs::write(&path, plot_svg(&[Series::line("phi", logistic)], &style)?)?;
    println!("wrote {}", path.display());

    let growth: Vec<(f64, f64)> = (1..=10).map(|t| (t as f64, (t as f64 / 2.0).exp())).collect();
    let noisy: Vec<(f64, f64)> = growth
        .iter()
        .map(|&(t, x)| (t, x * (1.0 + 0.05 * (3.0 * t).sin())))
        .collect();
    let style = PlotStyle {
        title: "level set vs e^{t/2}".into(),
        x_label: "t".into(),
        y_label: "x".into(),
        log_y: true,
        ..Default::default()
    };
    let path = dir.join("levelset.svg");
    std::fs::write(
        &path,
        plot_svg(
            &[Series::markers("measured", noisy), Series::line("e^{t/2}", growth)],
            &style,
        )?,
    )?;
    println!("wrote {}", path.display());
    Ok(())
}
