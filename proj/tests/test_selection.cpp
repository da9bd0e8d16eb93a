#include <doctest.h>

#include <vector>

#include "duet/imgops.hpp"
#include "duet/selection.hpp"
#include "support/generators.hpp"

using namespace duet;

namespace {

// Classifier with no input sensitivity whose verdict is fixed by dense biases.
Classifier verdict(int label) {
    Rng rng(0);
    Classifier m = Classifier::init({2, 2, 2}, rng);
    for (float& w : m.conv1_w) w = 0.0f;
    for (float& w : m.conv2_w) w = 0.0f;
    for (float& w : m.dense_w) w = 0.0f;
    m.dense_b[label] = 5.0f;
    return m;
}

CandidateEvaluation make_eval(std::size_t index, std::vector<bool> fooled, double s) {
    CandidateEvaluation e;
    e.index = index;
    e.fooled = std::move(fooled);
    e.ssim = s;
    return e;
}

AdversarialCandidate make_candidate(Image img, Stream stream) {
    AdversarialCandidate c;
    c.image = std::move(img);
    c.stream = stream;
    return c;
}

} // namespace

TEST_CASE("evaluation scores candidates against every classifier") {
    Rng rng(70);
    std::vector<Image> originals, candidates;
    for (int i = 0; i < 3; ++i) {
        originals.push_back(testgen::random_image(8, 8, rng));
        candidates.push_back(testgen::perturbed(originals.back(), 0.02, rng));
    }
    const std::vector<Classifier> judges = {verdict(kReal), verdict(kFake)};

    const std::vector<CandidateEvaluation> evals = evaluate(candidates, judges, originals);
    REQUIRE(evals.size() == 3);
    for (std::size_t i = 0; i < evals.size(); ++i) {
        CHECK(evals[i].index == i);
        REQUIRE(evals[i].fooled.size() == 2);
        CHECK(evals[i].fooled[0]);       // always-Real judge is fooled
        CHECK_FALSE(evals[i].fooled[1]); // always-Fake judge never is
        CHECK(evals[i].ssim == doctest::Approx(ssim(originals[i], candidates[i], 7)).epsilon(1e-12));
    }
}

TEST_CASE("evaluation rejects misaligned batches") {
    Rng rng(71);
    const std::vector<Image> one = {testgen::random_image(8, 8, rng)};
    const std::vector<Image> two = {testgen::random_image(8, 8, rng),
                                    testgen::random_image(8, 8, rng)};
    const std::vector<Classifier> judges = {verdict(kReal)};
    CHECK_THROWS_AS(evaluate(one, judges, two), std::invalid_argument);
    CHECK_THROWS_AS(evaluate(one, {}, one), std::invalid_argument);
}

TEST_CASE("score fixtures evaluate exactly") {
    // One image, one classifier, not fooled: contributes nothing.
    const std::vector<CandidateEvaluation> none = {make_eval(0, {false}, 0.9)};
    CHECK(score(none, "none").total == 0.0);

    // Two images fooling one classifier each at ssim 0.9: 0.9 + 0.9 == 1.8
    // exactly in binary floating point.
    const std::vector<CandidateEvaluation> pair = {make_eval(0, {true}, 0.9),
                                                   make_eval(1, {true}, 0.9)};
    const ScoreReport sp = score(pair, "pair");
    CHECK(sp.total == 1.8);
    CHECK(sp.n_images == 2);

    // Mixed columns: ssim 0.8 counts once for the single fooled classifier.
    const std::vector<CandidateEvaluation> mixed = {make_eval(0, {true, false}, 0.8)};
    CHECK(score(mixed, "mixed").total == 0.8);
}

TEST_CASE("score contributions decompose the total") {
    const std::vector<CandidateEvaluation> evals = {make_eval(0, {true, true}, 0.7),
                                                    make_eval(1, {false, true}, 0.5),
                                                    make_eval(2, {false, false}, 0.9)};
    const ScoreReport r = score(evals, "batch");
    REQUIRE(r.contributions.size() == 3);
    double sum = 0.0;
    for (const auto& row : r.contributions) {
        REQUIRE(row.size() == 2);
        for (double v : row) {
            CHECK(v >= 0.0);
            sum += v;
        }
    }
    CHECK(sum == doctest::Approx(r.total).epsilon(1e-9));
    CHECK(r.total == doctest::Approx(0.7 * 2 + 0.5).epsilon(1e-12));
    CHECK(r.label == "batch");

    CHECK_THROWS_AS(score({}, "empty"), std::invalid_argument);
}

TEST_CASE("scores are additive across disjoint batches") {
    const std::vector<CandidateEvaluation> a = {make_eval(0, {true}, 0.6)};
    const std::vector<CandidateEvaluation> b = {make_eval(0, {true}, 0.3)};
    std::vector<CandidateEvaluation> both = a;
    both.push_back(b[0]);
    CHECK(score(both, "").total ==
          doctest::Approx(score(a, "").total + score(b, "").total).epsilon(1e-9));
}

TEST_CASE("stream selection picks the higher per-image score") {
    Rng rng(72);
    const Image original = testgen::random_image(8, 8, rng);
    const Image near = testgen::perturbed(original, 0.01, rng);
    const Image far = testgen::perturbed(original, 0.2, rng);

    // Both candidates fool the only judge, so the more similar one wins.
    const std::vector<Classifier> fooled_judge = {verdict(kReal)};
    const SelectionOutcome closer_wins =
        select_streams(make_candidate(near, Stream::MntdPgd), make_candidate(far, Stream::SgPgd),
                       fooled_judge, original);
    CHECK(closer_wins.chosen == Stream::MntdPgd);
    CHECK(closer_wins.score_mntd > closer_wins.score_sg);

    const SelectionOutcome swapped =
        select_streams(make_candidate(far, Stream::MntdPgd), make_candidate(near, Stream::SgPgd),
                       fooled_judge, original);
    CHECK(swapped.chosen == Stream::SgPgd);
}

TEST_CASE("zero-score ties fall to the more similar candidate, exact ties to MNTD") {
    Rng rng(73);
    const Image original = testgen::random_image(8, 8, rng);
    const Image near = testgen::perturbed(original, 0.01, rng);
    const Image far = testgen::perturbed(original, 0.2, rng);

    // Nobody fools the always-Fake judge: both scores are zero.
    const std::vector<Classifier> stern_judge = {verdict(kFake)};
    const SelectionOutcome ssim_tiebreak =
        select_streams(make_candidate(far, Stream::MntdPgd), make_candidate(near, Stream::SgPgd),
                       stern_judge, original);
    CHECK(ssim_tiebreak.score_mntd == 0.0);
    CHECK(ssim_tiebreak.score_sg == 0.0);
    CHECK(ssim_tiebreak.chosen == Stream::SgPgd);

    // Identical candidates: full tie resolves to the MNTD stream.
    const SelectionOutcome full_tie =
        select_streams(make_candidate(near, Stream::MntdPgd), make_candidate(near, Stream::SgPgd),
                       stern_judge, original);
    CHECK(full_tie.chosen == Stream::MntdPgd);
}

TEST_CASE("the selected candidate always carries the max of the two scores") {
    Rng rng(74);
    const std::vector<Classifier> judges = {verdict(kReal), verdict(kFake), verdict(kReal)};
    for (int trial = 0; trial < 10; ++trial) {
        const Image original = testgen::random_image(8, 8, rng);
        const Image a = testgen::perturbed(original, rng.uniform(0.0, 0.3), rng);
        const Image b = testgen::perturbed(original, rng.uniform(0.0, 0.3), rng);
        const SelectionOutcome out = select_streams(
            make_candidate(a, Stream::MntdPgd), make_candidate(b, Stream::SgPgd), judges, original);
        const double chosen_score =
            out.chosen == Stream::MntdPgd ? out.score_mntd : out.score_sg;
        CHECK(chosen_score == std::max(out.score_mntd, out.score_sg));
    }
}

TEST_CASE("selection validates candidate shapes") {
    Rng rng(75);
    const Image original = testgen::random_image(8, 8, rng);
    const Image wrong = testgen::random_image(10, 10, rng);
    const std::vector<Classifier> judges = {verdict(kReal)};
    CHECK_THROWS_AS(select_streams(make_candidate(wrong, Stream::MntdPgd),
                                   make_candidate(original, Stream::SgPgd), judges, original),
                    std::invalid_argument);
}

TEST_CASE("the convenience selector returns the winning image") {
    Rng rng(76);
    const Image original = testgen::random_image(8, 8, rng);
    const Image near = testgen::perturbed(original, 0.01, rng);
    const Image far = testgen::perturbed(original, 0.25, rng);
    const std::vector<Classifier> judges = {verdict(kReal)};

    const AdversarialCandidate winner = select(make_candidate(near, Stream::MntdPgd),
                                               make_candidate(far, Stream::SgPgd), judges, original);
    CHECK(winner.stream == Stream::MntdPgd);
    CHECK(winner.image.pixels == near.pixels);
}

TEST_CASE("misclassification rates read one classifier column") {
    const std::vector<CandidateEvaluation> evals = {make_eval(0, {true, false}, 0.9),
                                                    make_eval(1, {true, false}, 0.9),
                                                    make_eval(2, {true, true}, 0.9),
                                                    make_eval(3, {false, false}, 0.9)};
    CHECK(misclassification_rate(evals, 0) == 75.0);
    CHECK(misclassification_rate(evals, 1) == 25.0);
    CHECK_THROWS_AS(misclassification_rate(evals, 2), std::invalid_argument);
    CHECK_THROWS_AS(misclassification_rate({}, 0), std::invalid_argument);
}

TEST_CASE("average similarity covers all images; the successful variant filters") {
    const std::vector<CandidateEvaluation> evals = {make_eval(0, {true, true}, 1.0),
                                                    make_eval(1, {true, false}, 0.5),
                                                    make_eval(2, {true, true}, 0.5)};
    CHECK(average_ssim(evals) == doctest::Approx((1.0 + 0.5 + 0.5) / 3).epsilon(1e-12));
    CHECK_THROWS_AS(average_ssim({}), std::invalid_argument);

    std::size_t n = 0;
    CHECK(average_ssim_successful(evals, &n) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(n == 2);

    const std::vector<CandidateEvaluation> hopeless = {make_eval(0, {false}, 0.9)};
    n = 99;
    CHECK(average_ssim_successful(hopeless, &n) == 0.0);
    CHECK(n == 0);
}
