# 工具测试包