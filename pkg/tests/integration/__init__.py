# tests/integration
# 集成测试包 