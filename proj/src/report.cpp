#include "duet/report.hpp"

#include <cstdio>
#include <fstream>

#include "duet/io.hpp"

namespace duet {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_report_csv(const std::string& path, const std::vector<std::string>& target_names,
                      const std::vector<ReportRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("report: cannot open " + path + " for writing");

    out << "image_id,stream,epsilon,ssim";
    for (const std::string& name : target_names) out << ',' << name << "_fooled";
    out << '\n';

    for (const ReportRow& row : rows) {
        if (row.fooled.size() != target_names.size()) {
            throw IoError("report: row " + row.image_id + " has a mismatched fooled-bit count");
        }
        out << row.image_id << ',' << row.stream << ',' << format_double(row.epsilon) << ','
            << format_double(row.ssim);
        for (bool bit : row.fooled) out << ',' << (bit ? '1' : '0');
        out << '\n';
    }
    if (!out) throw IoError("report: write failure on " + path);
}

} // namespace duet
