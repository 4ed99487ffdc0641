//! Segmentation metrics from a confusion matrix: mIoU, foreground/background
//! IoU and pixel accuracy, with ignored pixels left out.
//!
//! ```text
//! cargo run -p lseg-core --example metrics
//! ```

use lseg_core::data::IGNORE_INDEX;
use lseg_core::eval::{fb_iou, miou, pixacc, ConfusionMatrix};

fn main() -> lseg_core::Result<()> {
    // Class 0 is "other"; classes 1 and 2 are foreground.
    let truth = [0, 0, 0, 1, 1, 1, 2, 2, IGNORE_INDEX, 0];
    let pred = [0, 0, 1, 1, 1, 2, 2, 2, 1, 2];
    let cm = ConfusionMatrix::from_maps(3, &truth, &pred, Some(IGNORE_INDEX))?;
    let report = miou(&cm)?;
    for (k, iou) in report.per_class.iter().enumerate() {
        println!("IoU[{k}] = {}", iou.map_or("n/a".to_string(), |v| format!("{v:.4}")));
    }
    println!("mIoU   = {:.4}", report.mean);
    println!("FB-IoU = {:.4}", fb_iou(&cm, &[1, 2])?);
    println!("pixAcc = {:.4} over {} counted pixels", pixacc(&cm)?, cm.total());
    Ok(())
}
