// placeholder: module implemented in a later commit
namespace mrnls { int lab_stub_ = 0; }
