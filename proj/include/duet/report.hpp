#ifndef DUET_REPORT_HPP
#define DUET_REPORT_HPP

#include <string>
#include <vector>

namespace duet {

/// %.17g rendering: parses back to the identical double, so any aggregate a
/// reader recomputes from emitted rows matches the emitted aggregate exactly.
std::string format_double(double v);

struct ReportRow {
    std::string image_id;
    std::string stream;
    double epsilon = 0.0;
    double ssim = 0.0;
    std::vector<bool> fooled; // one per target, row order matches the header
};

/// Comma-separated table: image_id,stream,epsilon,ssim,<target>_fooled,...
/// Fooled bits are written as 0/1.
void write_report_csv(const std::string& path, const std::vector<std::string>& target_names,
                      const std::vector<ReportRow>& rows);

} // namespace duet

#endif // DUET_REPORT_HPP
