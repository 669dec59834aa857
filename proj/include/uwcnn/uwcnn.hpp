#pragma once

#include "uwcnn/checkpoint.hpp"
#include "uwcnn/color.hpp"
#include "uwcnn/commands.hpp"
#include "uwcnn/dataset.hpp"
#include "uwcnn/error.hpp"
#include "uwcnn/gradcheck.hpp"
#include "uwcnn/gradcheck_suite.hpp"
#include "uwcnn/imageio.hpp"
#include "uwcnn/loss.hpp"
#include "uwcnn/model.hpp"
#include "uwcnn/optim.hpp"
#include "uwcnn/parallel.hpp"
#include "uwcnn/quality.hpp"
#include "uwcnn/tensor.hpp"
#include "uwcnn/train.hpp"
#include "uwcnn/watersim.hpp"
