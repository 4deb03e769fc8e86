// metaimage.hpp - MetaImage (.mhd + .raw) I/O for volumes, masks and fields.
//
// Header keys handled: ObjectType, NDims, DimSize, ElementType (MET_SHORT |
// MET_FLOAT | MET_UCHAR), ElementSpacing, Offset, ElementNumberOfChannels,
// ElementDataFile. Raw data is little-endian.
#pragma once

#include <filesystem>

#include "corrtps/field.hpp"
#include "corrtps/segment.hpp"
#include "corrtps/volume.hpp"

namespace corrtps {

// Scalar volume. MET_SHORT reads as HU; MET_FLOAT reads as normalised unless
// the optional IntensityKind key says HU.
Volume read_metaimage(const std::filesystem::path& header_path);

// HU volumes whose samples are all integral shorts are written MET_SHORT;
// everything else MET_FLOAT. Float data round-trips bit-exactly.
void write_metaimage(const Volume& vol, const std::filesystem::path& header_path);

// Binary masks as MET_UCHAR 0/1. Label defaults to the file stem.
Mask read_mask(const std::filesystem::path& header_path, const std::string& label = "");
void write_mask(const Mask& mask, const std::filesystem::path& header_path);

// Displacement fields as 3-channel MET_FLOAT.
DisplacementField read_field(const std::filesystem::path& header_path);
void write_field(const DisplacementField& field, const std::filesystem::path& header_path);

} // namespace corrtps
