# 服务测试包