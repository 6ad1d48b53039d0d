# 模型测试包