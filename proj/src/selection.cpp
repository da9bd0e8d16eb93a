#include "duet/selection.hpp"

#include <stdexcept>
#include <utility>

#include "duet/imgops.hpp"

namespace duet {

namespace {

constexpr int kEvalSsimWindow = 7;

CandidateEvaluation evaluate_one(const Image& candidate, const std::vector<Classifier>& classifiers,
                                 const Image& original, std::size_t index) {
    CandidateEvaluation ev;
    ev.index = index;
    ev.fooled.resize(classifiers.size());
    for (std::size_t c = 0; c < classifiers.size(); ++c) {
        ev.fooled[c] = predict(classifiers[c], candidate) == kReal;
    }
    ev.ssim = ssim(original, candidate, kEvalSsimWindow);
    return ev;
}

double single_image_score(const CandidateEvaluation& ev) {
    double s = 0.0;
    for (bool bit : ev.fooled) {
        if (bit) s += ev.ssim;
    }
    return s;
}

} // namespace

std::vector<CandidateEvaluation> evaluate(const std::vector<Image>& candidates,
                                          const std::vector<Classifier>& classifiers,
                                          const std::vector<Image>& originals) {
    if (candidates.size() != originals.size()) {
        throw std::invalid_argument("evaluate: candidate and original batches are misaligned");
    }
    if (classifiers.empty()) {
        throw std::invalid_argument("evaluate: need at least one classifier");
    }
    std::vector<CandidateEvaluation> evals;
    evals.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        evals.push_back(evaluate_one(candidates[i], classifiers, originals[i], i));
    }
    return evals;
}

ScoreReport score(const std::vector<CandidateEvaluation>& evals, std::string label) {
    if (evals.empty()) throw std::invalid_argument("score: no evaluations given");
    ScoreReport report;
    report.label = std::move(label);
    report.n_images = static_cast<int>(evals.size());
    report.contributions.reserve(evals.size());
    for (const CandidateEvaluation& ev : evals) {
        std::vector<double> row(ev.fooled.size(), 0.0);
        for (std::size_t c = 0; c < ev.fooled.size(); ++c) {
            if (ev.fooled[c]) {
                row[c] = ev.ssim;
                report.total += ev.ssim;
            }
        }
        report.contributions.push_back(std::move(row));
    }
    return report;
}

SelectionOutcome select_streams(const AdversarialCandidate& cand_m,
                                const AdversarialCandidate& cand_s,
                                const std::vector<Classifier>& classifiers, const Image& original) {
    if (!cand_m.image.same_shape(original) || !cand_s.image.same_shape(original)) {
        throw std::invalid_argument("select: candidates do not match the original's shape");
    }
    SelectionOutcome out;
    out.eval_mntd = evaluate_one(cand_m.image, classifiers, original, 0);
    out.eval_sg = evaluate_one(cand_s.image, classifiers, original, 0);
    out.score_mntd = single_image_score(out.eval_mntd);
    out.score_sg = single_image_score(out.eval_sg);
    if (out.score_sg > out.score_mntd) {
        out.chosen = Stream::SgPgd;
    } else if (out.score_sg == out.score_mntd && out.eval_sg.ssim > out.eval_mntd.ssim) {
        out.chosen = Stream::SgPgd;
    } else {
        out.chosen = Stream::MntdPgd;
    }
    return out;
}

AdversarialCandidate select(const AdversarialCandidate& cand_m, const AdversarialCandidate& cand_s,
                            const std::vector<Classifier>& classifiers, const Image& original) {
    const SelectionOutcome out = select_streams(cand_m, cand_s, classifiers, original);
    return out.chosen == Stream::MntdPgd ? cand_m : cand_s;
}

double misclassification_rate(const std::vector<CandidateEvaluation>& evals,
                              std::size_t classifier_index) {
    if (evals.empty()) throw std::invalid_argument("misclassification_rate: no evaluations given");
    std::size_t fooled = 0;
    for (const CandidateEvaluation& ev : evals) {
        if (classifier_index >= ev.fooled.size()) {
            throw std::invalid_argument("misclassification_rate: classifier index out of range");
        }
        if (ev.fooled[classifier_index]) ++fooled;
    }
    return 100.0 * static_cast<double>(fooled) / static_cast<double>(evals.size());
}

double average_ssim(const std::vector<CandidateEvaluation>& evals) {
    if (evals.empty()) throw std::invalid_argument("average_ssim: no evaluations given");
    double sum = 0.0;
    for (const CandidateEvaluation& ev : evals) sum += ev.ssim;
    return sum / static_cast<double>(evals.size());
}

double average_ssim_successful(const std::vector<CandidateEvaluation>& evals, std::size_t* count) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const CandidateEvaluation& ev : evals) {
        bool all = !ev.fooled.empty();
        for (bool bit : ev.fooled) all = all && bit;
        if (all) {
            sum += ev.ssim;
            ++n;
        }
    }
    if (count) *count = n;
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

} // namespace duet

