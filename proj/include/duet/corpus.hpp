#ifndef DUET_CORPUS_HPP
#define DUET_CORPUS_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "duet/image.hpp"
#include "duet/model.hpp"

namespace duet {

struct LabeledCorpus {
    std::vector<Image> real;
    std::vector<Image> fake;
};

/// Procedural stand-in dataset. "Real" images are smooth low-frequency color
/// fields; "fake" images are the same kind of field plus a high-frequency
/// artifact (checkerboard, concentric rings, or stripes) whose shape, cell
/// size, and amplitude are drawn per image. Deterministic given the seed.
LabeledCorpus synthesize_corpus(int n_real, int n_fake, int size, std::uint64_t seed);

/// Writes real/NNNN.png and fake/NNNN.png under dir, creating directories.
void save_corpus(const LabeledCorpus& corpus, const std::filesystem::path& dir);

struct NamedImage {
    std::string id; // filename stem
    Image image;
};

/// Loads every *.png in dir, sorted by filename.
std::vector<NamedImage> load_image_dir(const std::filesystem::path& dir);

/// Loads the real/ and fake/ subdirectories written by save_corpus.
LabeledCorpus load_corpus(const std::filesystem::path& dir);

/// Flattens a corpus into training samples (real -> Real, fake -> Fake).
std::vector<TrainSample> corpus_samples(const LabeledCorpus& corpus);

} // namespace duet

#endif // DUET_CORPUS_HPP
