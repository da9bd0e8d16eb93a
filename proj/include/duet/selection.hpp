#ifndef DUET_SELECTION_HPP
#define DUET_SELECTION_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "duet/attack.hpp"
#include "duet/image.hpp"
#include "duet/model.hpp"

namespace duet {

/// Outcome of scoring one candidate against a set of black-box classifiers.
struct CandidateEvaluation {
    std::size_t index = 0;     // position in the evaluated batch
    std::vector<bool> fooled;  // per classifier: predicted Real
    double ssim = 0.0;         // against the matching original, window 7
};

struct ScoreReport {
    std::string label;   // which candidate set was scored (stream name or "selected")
    double total = 0.0;
    // contributions[i][c] = ssim_i * fooled_{i,c}; sums to total.
    std::vector<std::vector<double>> contributions;
    int n_images = 0;
};

/// Scores every (original, candidate) pair against every classifier.
/// Batches must align by index.
std::vector<CandidateEvaluation> evaluate(const std::vector<Image>& candidates,
                                          const std::vector<Classifier>& classifiers,
                                          const std::vector<Image>& originals);

/// Similarity-weighted fooling score: sum over classifiers and images of
/// ssim * [classifier predicted Real].
ScoreReport score(const std::vector<CandidateEvaluation>& evals, std::string label);

/// Per-image stream decision with full detail for reporting.
struct SelectionOutcome {
    Stream chosen = Stream::MntdPgd;
    double score_mntd = 0.0;
    double score_sg = 0.0;
    CandidateEvaluation eval_mntd;
    CandidateEvaluation eval_sg;
};

/// Scores both candidates against the classifiers (single-image
/// specialization of the batch score) and picks the higher one. Ties fall to
/// the higher SSIM, then to the MNTD-PGD candidate.
SelectionOutcome select_streams(const AdversarialCandidate& cand_m,
                                const AdversarialCandidate& cand_s,
                                const std::vector<Classifier>& classifiers, const Image& original);

/// Convenience wrapper returning the winning candidate itself.
AdversarialCandidate select(const AdversarialCandidate& cand_m, const AdversarialCandidate& cand_s,
                            const std::vector<Classifier>& classifiers, const Image& original);

/// 100 * fooled count / total images for one classifier column.
double misclassification_rate(const std::vector<CandidateEvaluation>& evals,
                              std::size_t classifier_index);

/// Mean ssim over every evaluation, failures included.
double average_ssim(const std::vector<CandidateEvaluation>& evals);

/// Mean ssim over evaluations that fooled every classifier; returns 0 and
/// sets *count to 0 when none qualify.
double average_ssim_successful(const std::vector<CandidateEvaluation>& evals,
                               std::size_t* count = nullptr);

} // namespace duet

#endif // DUET_SELECTION_HPP
